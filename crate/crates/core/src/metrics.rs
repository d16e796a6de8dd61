//! Aggregation of run results into per-phase reports, the phase ordering
//! checks, and the CSV/SVG renderings.

use std::fmt::Write as _;

use thiserror::Error;

use crate::scenario::format_rate;
use crate::sim::RunResult;
use crate::time::SimTime;
use crate::transition::MechanismPhase;

pub const PAGE_RESPONSE: &str = "page_response_time";
pub const TCP_DELAY: &str = "tcp_delay";
pub const QUEUE_DELAY: &str = "queue_delay";
pub const CPU_UTILIZATION: &str = "cpu_utilization";
pub const THROUGHPUT: &str = "throughput";

pub const REPORT_HEADER: &str = "phase,metric,mean,min,max,count";
pub const SERIES_HEADER: &str = "phase,metric,t_bucket,value";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: u64,
}

impl Aggregate {
    /// `None` for an empty sample set: absent, never zero.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Aggregate> {
        let mut acc: Option<Aggregate> = None;
        let mut sum = 0.0;
        for v in values {
            sum += v;
            acc = Some(match acc {
                None => Aggregate {
                    mean: 0.0,
                    min: v,
                    max: v,
                    count: 1,
                },
                Some(a) => Aggregate {
                    mean: 0.0,
                    min: a.min.min(v),
                    max: a.max.max(v),
                    count: a.count + 1,
                },
            });
        }
        acc.map(|a| Aggregate {
            mean: sum / a.count as f64,
            ..a
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub value: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub phase: MechanismPhase,
    pub seed: u64,
    pub workload: &'static str,
    pub data_rate: Option<u64>,
    pub bottleneck_bps: u64,
    pub warmup_cut: bool,
    pub rows: Vec<MetricRow>,
    /// `(metric, [(bucket, value)])`, one-second buckets over the whole run
    pub series: Vec<(String, Vec<(u64, f64)>)>,
}

impl MetricsReport {
    pub fn get(&self, metric: &str) -> Option<Aggregate> {
        self.rows.iter().find(|r| r.metric == metric).and_then(|r| r.value)
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.get(metric).map(|a| a.mean)
    }

    /// `throughput`, or `throughput_<rate>` when the run pinned a data rate.
    pub fn throughput_metric(&self) -> String {
        throughput_name(self.data_rate)
    }
}

fn throughput_name(rate: Option<u64>) -> String {
    match rate {
        Some(r) => format!("{THROUGHPUT}_{}", format_rate(r)),
        None => THROUGHPUT.to_string(),
    }
}

fn bucket_means(samples: &[(SimTime, f64)]) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64, u64)> = Vec::new();
    for &(t, v) in samples {
        let b = t.bucket_secs();
        match out.last_mut() {
            Some(last) if last.0 == b => {
                last.1 += v;
                last.2 += 1;
            }
            _ => out.push((b, v, 1)),
        }
    }
    out.into_iter().map(|(b, s, n)| (b, s / n as f64)).collect()
}

/// Summarizes a run. With `warmup_cut`, samples and buckets before the
/// configured warm-up are left out of the aggregates but kept in the series.
pub fn aggregate(run: &RunResult, warmup_cut: bool) -> MetricsReport {
    let from = if warmup_cut { run.warmup } else { SimTime::ZERO };
    let first_bucket = from.as_nanos().div_ceil(1_000_000_000) as usize;
    let samples = |s: &[(SimTime, f64)]| Aggregate::of(s.iter().filter(|x| x.0 >= from).map(|x| x.1));

    let cpu: Vec<f64> = run.cpu_busy_ns.iter().map(|&ns| ns as f64 / 1e7).collect();
    let thr: Vec<f64> = run.delivered_bytes.iter().map(|&b| b as f64).collect();
    let tput = throughput_name(run.data_rate);

    let mut rows = vec![
        MetricRow {
            metric: PAGE_RESPONSE.into(),
            value: samples(&run.page_response),
        },
        MetricRow {
            metric: TCP_DELAY.into(),
            value: samples(&run.tcp_delay),
        },
        MetricRow {
            metric: QUEUE_DELAY.into(),
            value: samples(&run.queue_delay),
        },
        MetricRow {
            metric: CPU_UTILIZATION.into(),
            value: Aggregate::of(cpu.iter().skip(first_bucket).copied()),
        },
        MetricRow {
            metric: tput.clone(),
            value: Aggregate::of(thr.iter().skip(first_bucket).copied()),
        },
    ];
    let c = &run.counters;
    for (name, v) in [
        ("drops", c.drops),
        ("retransmissions", c.retransmissions_sent),
        ("hop_discards", c.hop_discards),
        ("tunneled_packets", c.tunneled_packets),
        ("overhead_violations", c.overhead_violations),
        ("pages_completed", c.pages_completed),
        ("files_completed", c.files_completed),
    ] {
        let v = v as f64;
        rows.push(MetricRow {
            metric: name.into(),
            value: Some(Aggregate {
                mean: v,
                min: v,
                max: v,
                count: 1,
            }),
        });
    }

    let indexed = |v: &[f64]| v.iter().enumerate().map(|(i, &x)| (i as u64, x)).collect();
    let series = vec![
        (PAGE_RESPONSE.to_string(), bucket_means(&run.page_response)),
        (TCP_DELAY.to_string(), bucket_means(&run.tcp_delay)),
        (QUEUE_DELAY.to_string(), bucket_means(&run.queue_delay)),
        (CPU_UTILIZATION.to_string(), indexed(&cpu)),
        (tput, indexed(&thr)),
    ];
    MetricsReport {
        phase: run.phase,
        seed: run.seed,
        workload: run.workload,
        data_rate: run.data_rate,
        bottleneck_bps: run.bottleneck_bps,
        warmup_cut,
        rows,
        series,
    }
}

/// Six significant digits, plain decimal notation, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return "nan".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = 5 - magnitude;
    let mut s = if decimals >= 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    };
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn report_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        for row in &r.rows {
            let _ = match row.value {
                Some(a) => writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.phase,
                    row.metric,
                    format_sig6(a.mean),
                    format_sig6(a.min),
                    format_sig6(a.max),
                    a.count
                ),
                None => writeln!(out, "{},{},absent,absent,absent,0", r.phase, row.metric),
            };
        }
    }
    out
}

/// Names of every series metric across `reports`, in first-seen order.
pub fn series_metrics(reports: &[MetricsReport]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for (name, _) in reports.iter().flat_map(|r| r.series.iter()) {
        if !names.contains(name) {
            names.push(name.clone());
        }
    }
    names
}

pub fn series_csv(reports: &[MetricsReport], metric: &str) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for r in reports {
        for (_, points) in r.series.iter().filter(|(m, _)| m == metric) {
            for &(t, v) in points {
                let _ = writeln!(out, "{},{},{},{}", r.phase, metric, t, format_sig6(v));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComparisonError {
    #[error("need at least two reports to compare, got {0}")]
    TooFew(usize),
    #[error("seed mismatch: {first} vs {other}")]
    SeedMismatch { first: u64, other: u64 },
    #[error("workload mismatch: {first} vs {other}")]
    WorkloadMismatch { first: String, other: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Relative difference of one phase against the first report.
#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub metric: &'static str,
    pub phase: MechanismPhase,
    pub baseline: MechanismPhase,
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub checks: Vec<OrderingCheck>,
    pub margins: Vec<Margin>,
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Tunnel delay must clear the best native phase by this fraction.
pub const DELAY_MARGIN: f64 = 0.10;
pub const CPU_RATIO_RANGE: (f64, f64) = (1.5, 3.0);

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b) / b
    }
}

fn fmt_means(metric: &str, named: &[(MechanismPhase, Option<f64>)]) -> String {
    let parts: Vec<String> = named
        .iter()
        .map(|(p, v)| format!("{p}={}", v.map_or("absent".into(), format_sig6)))
        .collect();
    format!("{metric}: {}", parts.join(" "))
}

/// Checks the expected phase orderings over whichever phases are present;
/// an ordering whose phases are missing is not reported.
pub fn compare_phases(reports: &[MetricsReport]) -> Result<Comparison, ComparisonError> {
    if reports.len() < 2 {
        return Err(ComparisonError::TooFew(reports.len()));
    }
    let first = &reports[0];
    for r in &reports[1..] {
        if r.seed != first.seed {
            return Err(ComparisonError::SeedMismatch {
                first: first.seed,
                other: r.seed,
            });
        }
        if r.workload != first.workload || r.data_rate != first.data_rate {
            return Err(ComparisonError::WorkloadMismatch {
                first: format!("{}@{}", first.workload, first.throughput_metric()),
                other: format!("{}@{}", r.workload, r.throughput_metric()),
            });
        }
    }

    let mean = |p: MechanismPhase, m: &str| reports.iter().find(|r| r.phase == p).and_then(|r| r.mean(m));
    let has = |p: MechanismPhase| reports.iter().any(|r| r.phase == p);
    use MechanismPhase::*;
    let natives: Vec<MechanismPhase> = [Ipv4, Ipv6, DualStack].into_iter().filter(|&p| has(p)).collect();
    let tunnels_present = has(ManualTunnel) && has(SixToFour);
    let mut checks = Vec::new();

    if tunnels_present && !natives.is_empty() {
        let named: Vec<_> = MechanismPhase::ALL
            .iter()
            .filter(|&&p| has(p))
            .map(|&p| (p, mean(p, TCP_DELAY)))
            .collect();
        let (m, s) = (mean(ManualTunnel, TCP_DELAY), mean(SixToFour, TCP_DELAY));
        let nat: Option<Vec<f64>> = natives.iter().map(|&p| mean(p, TCP_DELAY)).collect();
        let (pass, margin) = match (m, s, nat) {
            (Some(m), Some(s), Some(nat)) => {
                let best = nat.iter().copied().fold(f64::INFINITY, f64::min);
                let margin = rel(m.min(s), best);
                (
                    m > s && nat.iter().all(|&n| s > n) && margin >= DELAY_MARGIN,
                    Some(margin),
                )
            }
            _ => (false, None),
        };
        checks.push(OrderingCheck {
            name: "tcp_delay manual > 6to4 > native",
            pass,
            detail: format!(
                "{}; tunnel vs best native {}",
                fmt_means(TCP_DELAY, &named),
                margin.map_or("absent".into(), |x| format!("{:+.1}%", 100.0 * x))
            ),
        });

        let named: Vec<_> = MechanismPhase::ALL
            .iter()
            .filter(|&&p| has(p))
            .map(|&p| (p, mean(p, CPU_UTILIZATION)))
            .collect();
        let (m, s) = (mean(ManualTunnel, CPU_UTILIZATION), mean(SixToFour, CPU_UTILIZATION));
        let nat: Option<Vec<f64>> = natives.iter().map(|&p| mean(p, CPU_UTILIZATION)).collect();
        let ratio = m.zip(mean(Ipv4, CPU_UTILIZATION)).map(|(m, v4)| m / v4);
        let pass = match (m, s, nat) {
            (Some(m), Some(s), Some(nat)) => {
                m > s
                    && nat.iter().all(|&n| s > n)
                    && ratio.is_none_or(|r| (CPU_RATIO_RANGE.0..=CPU_RATIO_RANGE.1).contains(&r))
            }
            _ => false,
        };
        checks.push(OrderingCheck {
            name: "cpu_utilization manual > 6to4 > native",
            pass,
            detail: format!(
                "{}; manual/ipv4 {}",
                fmt_means(CPU_UTILIZATION, &named),
                ratio.map_or("absent".into(), |r| format!("{r:.3}"))
            ),
        });

        let named: Vec<_> = MechanismPhase::ALL
            .iter()
            .filter(|&&p| has(p))
            .map(|&p| (p, mean(p, PAGE_RESPONSE)))
            .collect();
        let t: Option<f64> = mean(ManualTunnel, PAGE_RESPONSE)
            .zip(mean(SixToFour, PAGE_RESPONSE))
            .map(|(a, b)| a.min(b));
        let nat: Option<Vec<f64>> = natives.iter().map(|&p| mean(p, PAGE_RESPONSE)).collect();
        if first.workload == "http" {
            checks.push(OrderingCheck {
                name: "page_response native < tunnels",
                pass: matches!((t, nat), (Some(t), Some(nat)) if nat.iter().all(|&n| n < t)),
                detail: fmt_means(PAGE_RESPONSE, &named),
            });
        }
    }

    if has(Ipv4) && has(Ipv6) {
        let (a, b) = (mean(Ipv4, QUEUE_DELAY), mean(Ipv6, QUEUE_DELAY));
        checks.push(OrderingCheck {
            name: "queue_delay ipv4 <= ipv6",
            pass: matches!((a, b), (Some(a), Some(b)) if a <= b),
            detail: fmt_means(QUEUE_DELAY, &[(Ipv4, a), (Ipv6, b)]),
        });
    }

    let mut margins = Vec::new();
    for r in &reports[1..] {
        for metric in [PAGE_RESPONSE, TCP_DELAY, QUEUE_DELAY, CPU_UTILIZATION] {
            margins.push(Margin {
                metric,
                phase: r.phase,
                baseline: first.phase,
                relative: r.mean(metric).zip(first.mean(metric)).map(|(a, b)| rel(a, b)),
            });
        }
    }
    Ok(Comparison { checks, margins })
}

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// A self-contained SVG line chart of one metric, one line per report.
pub fn svg_plot(reports: &[MetricsReport], metric: &str) -> String {
    let (w, h, pad) = (640.0, 360.0, 48.0);
    let lines: Vec<(MechanismPhase, &[(u64, f64)])> = reports
        .iter()
        .filter_map(|r| {
            r.series
                .iter()
                .find(|(m, _)| m == metric)
                .map(|(_, s)| (r.phase, s.as_slice()))
        })
        .collect();
    let pts = lines.iter().flat_map(|(_, s)| s.iter());
    let (mut tmax, mut vmax) = (1.0f64, 0.0f64);
    for &(t, v) in pts {
        tmax = tmax.max(t as f64);
        vmax = vmax.max(v);
    }
    if vmax <= 0.0 {
        vmax = 1.0;
    }
    let x = |t: f64| pad + (w - 2.0 * pad) * t / tmax;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * v / vmax;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{metric}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        pad - 4.0,
        pad + 4.0,
        format_sig6(vmax)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">0</text>"#,
        pad - 4.0,
        h - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{} s</text>"#,
        w - pad,
        h - pad + 16.0,
        tmax
    );
    for (i, (phase, series)) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(k, &(t, v))| format!("{}{:.1} {:.1}", if k == 0 { 'M' } else { 'L' }, x(t as f64), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            d.join(" ")
        );
        let ly = pad + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{phase}</text>"#,
            w - pad - 70.0
        );
    }
    s.push_str("</svg>\n");
    s
}
