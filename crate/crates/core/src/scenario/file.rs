//! Line-oriented `key = value` format with `[section]` headers.
//!
//! ```text
//! [run]
//! phase = 6to4
//! duration = 300
//!
//! [tunnel]
//! router_a.tunnel_type = 6to4
//! router_a.tunnel_source = 192.168.1.1
//! ```
//!
//! `#` starts a comment. Keys absent from the file take the reference
//! value for the file's phase, except that a router's tunnel block is
//! replaced as a whole once any of its keys appears.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::topology::Topology;
use super::{format_rate, parse_rate, ScenarioConfig};
use crate::addressing::derive_6to4_prefix;
use crate::packet::{AddrParseError, Ipv4Address, Ipv4Prefix, Ipv6Address, Ipv6Prefix};
use crate::time::SimTime;
use crate::transition::{DualStackPolicy, MechanismPhase, TransitionError, TunnelConfig, TunnelMode};
use crate::transport::{FtpTransfer, HttpProfile, TransferDirection, Workload, WorkloadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioErrorKind {
    #[error("cannot read file: {0}")]
    Io(String),
    #[error("expected `key = value` or `[section]`")]
    Syntax,
    #[error("key outside any section")]
    NoSection,
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("malformed address: {0}")]
    Address(AddrParseError),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value {
        key: String,
        value: String,
        reason: &'static str,
    },
    #[error("phase mismatch: {0}")]
    PhaseMismatch(String),
    #[error("duplicate address {0}")]
    DuplicateAddress(String),
    #[error("tunnel: {0}")]
    Tunnel(TransitionError),
    #[error("workload: {0}")]
    Workload(WorkloadError),
    #[error("topology: {0}")]
    Topology(String),
}

/// Load error; `line` is 1-based, or 0 when no single line is to blame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: usize,
    pub kind: ScenarioErrorKind,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "line {}: {}", self.line, self.kind)
        }
    }
}

impl std::error::Error for ScenarioError {}

fn err(line: usize, kind: ScenarioErrorKind) -> ScenarioError {
    ScenarioError { line, kind }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["phase", "duration", "seed", "warmup", "data_rate"]),
    (
        "topology",
        &[
            "hosts",
            "switches",
            "backbone_routers",
            "lan_rate",
            "wan_rate",
            "backbone_rate",
            "lan_delay_us",
            "wan_delay_us",
            "backbone_delay_us",
        ],
    ),
    (
        "addressing",
        &[
            "lan_v4",
            "lan_v6",
            "router_a_v4",
            "router_a_v6",
            "server_lan_v4",
            "server_lan_v6",
            "router_b_v4",
            "router_b_v6",
            "backbone_v4",
            "backbone_v6",
            "dual_policy",
            "dual_stack_switches",
        ],
    ),
    (
        "tunnel",
        &[
            "router_a.tunnel_type",
            "router_a.tunnel_source",
            "router_a.tunnel_destination",
            "router_a.address",
            "router_a.prefix",
            "router_b.tunnel_type",
            "router_b.tunnel_source",
            "router_b.tunnel_destination",
            "router_b.address",
            "router_b.prefix",
        ],
    ),
    (
        "application",
        &["kind", "page_size", "request_size", "file_size", "direction"],
    ),
    ("profile", &["think_time_mean", "repeat_count"]),
    (
        "des",
        &[
            "base_service_us",
            "tunnel_surcharge_us",
            "translate_surcharge_us",
            "lookup_surcharge_us",
            "queue_capacity",
            "mss",
            "max_window",
            "min_rto_ms",
        ],
    ),
];

/// Where each key was set; keys are `section.key`.
pub(crate) type LineMap = HashMap<String, usize>;

struct Entries {
    values: HashMap<String, (String, usize)>,
}

impl Entries {
    fn get(&self, path: &str) -> Option<(&str, usize)> {
        self.values.get(path).map(|(v, l)| (v.as_str(), *l))
    }

    fn parse<T: FromStr>(&self, path: &str, reason: &'static str) -> Result<Option<T>, ScenarioError> {
        let Some((v, line)) = self.get(path) else {
            return Ok(None);
        };
        v.parse().map(Some).map_err(|_| bad(path, v, line, reason))
    }

    fn addr<T: FromStr<Err = AddrParseError>>(&self, path: &str) -> Result<Option<T>, ScenarioError> {
        let Some((v, line)) = self.get(path) else {
            return Ok(None);
        };
        v.parse()
            .map(Some)
            .map_err(|e| err(line, ScenarioErrorKind::Address(e)))
    }

    fn with<T>(
        &self,
        path: &str,
        reason: &'static str,
        f: impl FnOnce(&str) -> Option<T>,
    ) -> Result<Option<T>, ScenarioError> {
        let Some((v, line)) = self.get(path) else {
            return Ok(None);
        };
        f(v).map(Some).ok_or_else(|| bad(path, v, line, reason))
    }

    fn line(&self, path: &str) -> usize {
        self.get(path).map_or(0, |(_, l)| l)
    }
}

fn bad(path: &str, value: &str, line: usize, reason: &'static str) -> ScenarioError {
    let key = path.split_once('.').map_or(path, |(_, k)| k).to_string();
    err(
        line,
        ScenarioErrorKind::Value {
            key,
            value: value.to_string(),
            reason,
        },
    )
}

fn tokenize(text: &str) -> Result<Entries, ScenarioError> {
    let mut values = HashMap::new();
    let mut section: Option<&'static (&'static str, &'static [&'static str])> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, ScenarioErrorKind::Syntax))?
                .trim();
            section = Some(
                SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .ok_or_else(|| err(line_no, ScenarioErrorKind::UnknownSection(name.to_string())))?,
            );
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, ScenarioErrorKind::Syntax))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err(line_no, ScenarioErrorKind::Syntax));
        }
        let (sec, keys) = section.ok_or_else(|| err(line_no, ScenarioErrorKind::NoSection))?;
        if !keys.contains(&key) {
            return Err(err(line_no, ScenarioErrorKind::UnknownKey(key.to_string())));
        }
        let path = format!("{sec}.{key}");
        if values.insert(path, (value.to_string(), line_no)).is_some() {
            return Err(err(line_no, ScenarioErrorKind::DuplicateKey(key.to_string())));
        }
    }
    Ok(Entries { values })
}

fn parse_secs(v: &str) -> Option<SimTime> {
    let s: f64 = v.parse().ok()?;
    (s.is_finite() && s >= 0.0).then(|| SimTime::from_secs_f64(s))
}

fn parse_scaled(v: &str, unit_secs: f64) -> Option<SimTime> {
    let x: f64 = v.parse().ok()?;
    (x.is_finite() && x >= 0.0).then(|| SimTime::from_secs_f64(x * unit_secs))
}

fn parse_policy(v: &str) -> Option<DualStackPolicy> {
    match v {
        "prefer_v6" => Some(DualStackPolicy::PreferV6),
        "prefer_v4" => Some(DualStackPolicy::PreferV4),
        _ => None,
    }
}

fn policy_name(p: DualStackPolicy) -> &'static str {
    match p {
        DualStackPolicy::PreferV6 => "prefer_v6",
        DualStackPolicy::PreferV4 => "prefer_v4",
    }
}

fn parse_direction(v: &str) -> Option<TransferDirection> {
    match v {
        "down" => Some(TransferDirection::Down),
        "up" => Some(TransferDirection::Up),
        _ => None,
    }
}

/// Parses scenario text into a validated config.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let e = tokenize(text)?;
    let phase: MechanismPhase = e
        .parse("run.phase", "expected ipv4, ipv6, dualstack, manual or 6to4")?
        .ok_or_else(|| err(0, ScenarioErrorKind::Missing("phase")))?;
    let mut cfg = ScenarioConfig::reference(phase);

    let r = &mut cfg.run;
    if let Some(v) = e.with("run.duration", "expected seconds", parse_secs)? {
        r.duration = v;
    }
    if let Some(v) = e.parse("run.seed", "expected an unsigned integer")? {
        r.seed = v;
    }
    if let Some(v) = e.with("run.warmup", "expected seconds", parse_secs)? {
        r.warmup = v;
    }
    r.data_rate = e.with("run.data_rate", "expected a rate such as 2M", parse_rate)?;

    let t = &mut cfg.topology;
    let count = "expected a positive integer";
    let rate = "expected a rate such as 100M";
    let delay = "expected microseconds";
    for (key, slot) in [
        ("topology.hosts", &mut t.hosts),
        ("topology.switches", &mut t.switches),
        ("topology.backbone_routers", &mut t.backbone_routers),
    ] {
        if let Some(v) = e.with(key, count, |s| s.parse::<u32>().ok().filter(|&n| n > 0))? {
            *slot = v;
        }
    }
    for (key, slot) in [
        ("topology.lan_rate", &mut t.lan_rate),
        ("topology.wan_rate", &mut t.wan_rate),
        ("topology.backbone_rate", &mut t.backbone_rate),
    ] {
        if let Some(v) = e.with(key, rate, parse_rate)? {
            *slot = v;
        }
    }
    for (key, slot) in [
        ("topology.lan_delay_us", &mut t.lan_delay),
        ("topology.wan_delay_us", &mut t.wan_delay),
        ("topology.backbone_delay_us", &mut t.backbone_delay),
    ] {
        if let Some(v) = e.with(key, delay, |s| parse_scaled(s, 1e-6))? {
            *slot = v;
        }
    }

    let a = &mut cfg.addressing;
    for (key, slot) in [
        ("addressing.lan_v4", &mut a.lan_v4),
        ("addressing.server_lan_v4", &mut a.server_lan_v4),
        ("addressing.backbone_v4", &mut a.backbone_v4),
    ] {
        if let Some(v) = e.addr::<Ipv4Prefix>(key)? {
            *slot = v;
        }
    }
    for (key, slot) in [
        ("addressing.lan_v6", &mut a.lan_v6),
        ("addressing.server_lan_v6", &mut a.server_lan_v6),
        ("addressing.backbone_v6", &mut a.backbone_v6),
    ] {
        if let Some(v) = e.addr::<Ipv6Prefix>(key)? {
            *slot = v;
        }
    }
    for (key, slot) in [
        ("addressing.router_a_v4", &mut a.router_a_v4),
        ("addressing.router_b_v4", &mut a.router_b_v4),
    ] {
        if let Some(v) = e.addr::<Ipv4Address>(key)? {
            *slot = v;
        }
    }
    for (key, slot) in [
        ("addressing.router_a_v6", &mut a.router_a_v6),
        ("addressing.router_b_v6", &mut a.router_b_v6),
    ] {
        if let Some(v) = e.addr::<Ipv6Address>(key)? {
            *slot = v;
        }
    }
    if let Some(v) = e.with(
        "addressing.dual_policy",
        "expected prefer_v6 or prefer_v4",
        parse_policy,
    )? {
        a.dual_policy = v;
    }
    if let Some(v) = e.parse("addressing.dual_stack_switches", "expected an unsigned integer")? {
        a.dual_stack_switches = v;
    }

    cfg.tunnel.router_a = tunnel_block(&e, "router_a", cfg.tunnel.router_a)?;
    cfg.tunnel.router_b = tunnel_block(&e, "router_b", cfg.tunnel.router_b)?;

    cfg.workload = workload(&e, cfg.workload)?;

    let d = &mut cfg.des;
    for (key, slot) in [
        ("des.base_service_us", &mut d.base_service),
        ("des.tunnel_surcharge_us", &mut d.tunnel_surcharge),
        ("des.translate_surcharge_us", &mut d.translate_surcharge),
        ("des.lookup_surcharge_us", &mut d.lookup_surcharge),
    ] {
        if let Some(v) = e.with(key, delay, |s| parse_scaled(s, 1e-6))? {
            *slot = v;
        }
    }
    if let Some(v) = e.with("des.queue_capacity", count, |s| {
        s.parse::<usize>().ok().filter(|&n| n > 0)
    })? {
        d.queue_capacity = v;
    }
    if let Some(v) = e.with("des.mss", count, |s| {
        s.parse::<u32>().ok().filter(|&n| n > 0 && n <= 65_000)
    })? {
        d.tcp.mss = v;
    }
    if let Some(v) = e.with("des.max_window", count, |s| s.parse::<u32>().ok().filter(|&n| n > 0))? {
        d.tcp.max_window = v;
        d.tcp.initial_ssthresh = v;
    }
    if let Some(v) = e.with("des.min_rto_ms", "expected milliseconds", |s| parse_scaled(s, 1e-3))? {
        d.tcp.min_rto = v;
    }

    let lines: LineMap = e.values.iter().map(|(k, (_, l))| (k.clone(), *l)).collect();
    validate(&cfg, &lines)?;
    Ok(cfg)
}

fn tunnel_block(
    e: &Entries,
    router: &str,
    fallback: Option<TunnelConfig>,
) -> Result<Option<TunnelConfig>, ScenarioError> {
    let key = |k: &str| format!("tunnel.{router}.{k}");
    let fields = [
        "tunnel_type",
        "tunnel_source",
        "tunnel_destination",
        "address",
        "prefix",
    ];
    let first_line = fields.iter().map(|f| e.line(&key(f))).filter(|&l| l > 0).min();
    let Some(block_line) = first_line else {
        return Ok(fallback);
    };
    let type_key = key("tunnel_type");
    let mode: TunnelMode = e
        .parse(&type_key, "expected manual or 6to4")?
        .ok_or_else(|| err(block_line, ScenarioErrorKind::Missing("tunnel_type")))?;
    let source: Ipv4Address = e
        .addr(&key("tunnel_source"))?
        .ok_or_else(|| err(block_line, ScenarioErrorKind::Missing("tunnel_source")))?;
    let dest: Option<Ipv4Address> = e.addr(&key("tunnel_destination"))?;
    let address: Ipv6Address = e
        .addr(&key("address"))?
        .ok_or_else(|| err(block_line, ScenarioErrorKind::Missing("address")))?;
    let prefix: u8 = e
        .with(&key("prefix"), "expected 0..=128", |s| {
            s.parse::<u8>().ok().filter(|&p| p <= 128)
        })?
        .unwrap_or(128);
    if mode == TunnelMode::Manual && dest.is_none() {
        return Err(err(
            e.line(&type_key).max(block_line),
            ScenarioErrorKind::Missing("tunnel_destination"),
        ));
    }
    let line = match dest {
        Some(_) => e.line(&key("tunnel_destination")),
        None => e.line(&type_key),
    };
    TunnelConfig::new(mode, source, dest, address, prefix)
        .map(Some)
        .map_err(|t| err(line, ScenarioErrorKind::Tunnel(t)))
}

fn workload(e: &Entries, fallback: Workload) -> Result<Workload, ScenarioError> {
    let kind = e.get("application.kind");
    let mut w = match kind {
        None => fallback,
        Some(("http", _)) => Workload::Http(HttpProfile::heavy_browsing()),
        Some(("ftp", _)) => Workload::Ftp(FtpTransfer::bulk_download()),
        Some((v, line)) => return Err(bad("application.kind", v, line, "expected http or ftp")),
    };
    let size = "expected a positive byte count";
    let positive = |s: &str| s.parse::<u64>().ok().filter(|&n| n > 0);
    let misplaced = |path: &str| -> Result<(), ScenarioError> {
        match e.get(path) {
            Some((v, line)) => Err(bad(path, v, line, "does not apply to this application kind")),
            None => Ok(()),
        }
    };
    match &mut w {
        Workload::Http(h) => {
            misplaced("application.file_size")?;
            misplaced("application.direction")?;
            if let Some(v) = e.with("application.page_size", size, positive)? {
                h.page_size = v;
            }
            if let Some(v) = e.with("application.request_size", size, positive)? {
                h.request_size = v;
            }
            if let Some(v) = e.with(
                "profile.think_time_mean",
                "expected positive seconds",
                parse_positive_f64,
            )? {
                h.think_time_mean = v;
            }
            if let Some(v) = e.with("profile.repeat_count", size, |s| {
                s.parse::<u32>().ok().filter(|&n| n > 0)
            })? {
                h.repeat_count = Some(v);
            }
        }
        Workload::Ftp(f) => {
            misplaced("application.page_size")?;
            misplaced("application.request_size")?;
            misplaced("profile.repeat_count")?;
            if let Some(v) = e.with("application.file_size", size, positive)? {
                f.file_size = v;
            }
            if let Some(v) = e.with("application.direction", "expected up or down", parse_direction)? {
                f.direction = v;
            }
            if let Some(v) = e.with(
                "profile.think_time_mean",
                "expected positive seconds",
                parse_positive_f64,
            )? {
                f.think_time_mean = v;
            }
        }
    }
    let line = e.line("application.kind");
    w.validate().map_err(|x| err(line, ScenarioErrorKind::Workload(x)))?;
    Ok(w)
}

fn parse_positive_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0)
}

/// Cross-field checks shared by the loader and programmatic configs.
pub(crate) fn validate(cfg: &ScenarioConfig, lines: &LineMap) -> Result<(), ScenarioError> {
    let line = |k: &str| lines.get(k).copied().unwrap_or(0);
    let phase = cfg.run.phase;
    let mismatch = |k: &str, msg: String| err(line(k), ScenarioErrorKind::PhaseMismatch(msg));
    let a = &cfg.addressing;

    if cfg.run.duration == SimTime::ZERO {
        return Err(bad(
            "run.duration",
            "0",
            line("run.duration"),
            "duration must be positive",
        ));
    }
    if cfg.run.warmup >= cfg.run.duration {
        return Err(bad(
            "run.warmup",
            &cfg.run.warmup.as_secs_f64().to_string(),
            line("run.warmup"),
            "warm-up must be shorter than the run",
        ));
    }
    if a.dual_stack_switches > cfg.topology.switches {
        return Err(bad(
            "addressing.dual_stack_switches",
            &a.dual_stack_switches.to_string(),
            line("addressing.dual_stack_switches"),
            "more than the number of switches",
        ));
    }
    cfg.workload
        .validate()
        .map_err(|x| err(line("application.kind"), ScenarioErrorKind::Workload(x)))?;

    if phase == MechanismPhase::SixToFour {
        for (key, lan, router_v4) in [
            ("addressing.lan_v6", a.lan_v6, a.router_a_v4),
            ("addressing.server_lan_v6", a.server_lan_v6, a.router_b_v4),
        ] {
            let site = derive_6to4_prefix(router_v4).as_prefix();
            if lan.len < site.len || !site.contains(lan.network) {
                return Err(mismatch(
                    key,
                    format!("{lan} is not inside the 6to4 site prefix {site} of {router_v4}"),
                ));
            }
        }
    }

    if !a.lan_v6.contains(a.router_a_v6) {
        return Err(mismatch(
            "addressing.router_a_v6",
            format!("{} lies outside lan_v6 {}", a.router_a_v6, a.lan_v6),
        ));
    }
    if !a.server_lan_v6.contains(a.router_b_v6) {
        return Err(mismatch(
            "addressing.router_b_v6",
            format!("{} lies outside server_lan_v6 {}", a.router_b_v6, a.server_lan_v6),
        ));
    }
    let tunnels = [
        ("router_a", cfg.tunnel.router_a, a.router_a_v4, a.router_b_v4),
        ("router_b", cfg.tunnel.router_b, a.router_b_v4, a.router_a_v4),
    ];
    for (name, t, own_v4, peer_v4) in tunnels {
        let type_key = format!("tunnel.{name}.tunnel_type");
        let expected = match phase {
            MechanismPhase::ManualTunnel => Some(TunnelMode::Manual),
            MechanismPhase::SixToFour => Some(TunnelMode::SixToFour),
            _ => None,
        };
        match (expected, t) {
            (None, None) => {}
            (None, Some(_)) => {
                return Err(mismatch(
                    &type_key,
                    format!("{name} has a tunnel but phase {phase} is native"),
                ));
            }
            (Some(_), None) => {
                return Err(err(
                    0,
                    ScenarioErrorKind::PhaseMismatch(format!("phase {phase} needs a tunnel on {name}")),
                ));
            }
            (Some(mode), Some(t)) => {
                if t.mode() != mode {
                    return Err(mismatch(
                        &type_key,
                        format!("{name} tunnel is {} but phase is {phase}", t.mode()),
                    ));
                }
                if t.source() != own_v4 {
                    return Err(mismatch(
                        &format!("tunnel.{name}.tunnel_source"),
                        format!("tunnel source {} is not {name}'s IPv4 address {own_v4}", t.source()),
                    ));
                }
                if let Some(d) = t.destination() {
                    if d != peer_v4 {
                        return Err(mismatch(
                            &format!("tunnel.{name}.tunnel_destination"),
                            format!("tunnel destination {d} is not the far edge router {peer_v4}"),
                        ));
                    }
                }
            }
        }
    }

    let topo = Topology::build(cfg).map_err(|t| {
        let l = match &t {
            super::TopologyError::AddressSpace { key, .. } => line(&format!("addressing.{key}")),
            super::TopologyError::Empty => 0,
        };
        err(l, ScenarioErrorKind::Topology(t.to_string()))
    })?;
    if let Some((addr, first, second)) = topo.duplicate_addresses().into_iter().next() {
        let path = |key: &str| match key {
            "router_a.address" | "router_b.address" => format!("tunnel.{key}"),
            k => format!("addressing.{k}"),
        };
        let l = line(&path(first)).max(line(&path(second)));
        return Err(err(l, ScenarioErrorKind::DuplicateAddress(addr.to_string())));
    }
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| err(0, ScenarioErrorKind::Io(e.to_string())))?;
    parse_scenario(&text)
}

fn fmt_secs(t: SimTime) -> String {
    fmt_scaled(t, 1_000_000_000)
}

fn fmt_scaled(t: SimTime, unit_ns: u64) -> String {
    let ns = t.as_nanos();
    let whole = ns / unit_ns;
    let frac = ns % unit_ns;
    if frac == 0 {
        return whole.to_string();
    }
    let width = unit_ns.ilog10() as usize;
    let digits = format!("{frac:0width$}");
    format!("{whole}.{}", digits.trim_end_matches('0'))
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v}")
}

/// Canonical text form. Parsing it yields an identical config.
pub fn serialize_scenario(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let r = &cfg.run;
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "phase = {}", r.phase);
    let _ = writeln!(s, "duration = {}", fmt_secs(r.duration));
    let _ = writeln!(s, "seed = {}", r.seed);
    let _ = writeln!(s, "warmup = {}", fmt_secs(r.warmup));
    if let Some(rate) = r.data_rate {
        let _ = writeln!(s, "data_rate = {}", format_rate(rate));
    }

    let t = &cfg.topology;
    let _ = writeln!(s, "\n[topology]");
    let _ = writeln!(s, "hosts = {}", t.hosts);
    let _ = writeln!(s, "switches = {}", t.switches);
    let _ = writeln!(s, "backbone_routers = {}", t.backbone_routers);
    let _ = writeln!(s, "lan_rate = {}", format_rate(t.lan_rate));
    let _ = writeln!(s, "wan_rate = {}", format_rate(t.wan_rate));
    let _ = writeln!(s, "backbone_rate = {}", format_rate(t.backbone_rate));
    let _ = writeln!(s, "lan_delay_us = {}", fmt_scaled(t.lan_delay, 1_000));
    let _ = writeln!(s, "wan_delay_us = {}", fmt_scaled(t.wan_delay, 1_000));
    let _ = writeln!(s, "backbone_delay_us = {}", fmt_scaled(t.backbone_delay, 1_000));

    let a = &cfg.addressing;
    let _ = writeln!(s, "\n[addressing]");
    let _ = writeln!(s, "lan_v4 = {}", a.lan_v4);
    let _ = writeln!(s, "lan_v6 = {}", a.lan_v6);
    let _ = writeln!(s, "router_a_v4 = {}", a.router_a_v4);
    let _ = writeln!(s, "router_a_v6 = {}", a.router_a_v6);
    let _ = writeln!(s, "server_lan_v4 = {}", a.server_lan_v4);
    let _ = writeln!(s, "server_lan_v6 = {}", a.server_lan_v6);
    let _ = writeln!(s, "router_b_v4 = {}", a.router_b_v4);
    let _ = writeln!(s, "router_b_v6 = {}", a.router_b_v6);
    let _ = writeln!(s, "backbone_v4 = {}", a.backbone_v4);
    let _ = writeln!(s, "backbone_v6 = {}", a.backbone_v6);
    let _ = writeln!(s, "dual_policy = {}", policy_name(a.dual_policy));
    let _ = writeln!(s, "dual_stack_switches = {}", a.dual_stack_switches);

    if cfg.tunnel.router_a.is_some() || cfg.tunnel.router_b.is_some() {
        let _ = writeln!(s, "\n[tunnel]");
        for (name, t) in [("router_a", cfg.tunnel.router_a), ("router_b", cfg.tunnel.router_b)] {
            let Some(t) = t else { continue };
            let _ = writeln!(s, "{name}.tunnel_type = {}", t.mode());
            let _ = writeln!(s, "{name}.tunnel_source = {}", t.source());
            if let Some(d) = t.destination() {
                let _ = writeln!(s, "{name}.tunnel_destination = {d}");
            }
            let _ = writeln!(s, "{name}.address = {}", t.tunnel_address());
            let _ = writeln!(s, "{name}.prefix = {}", t.prefix_len());
        }
    }

    let _ = writeln!(s, "\n[application]");
    match &cfg.workload {
        Workload::Http(h) => {
            let _ = writeln!(s, "kind = http");
            let _ = writeln!(s, "page_size = {}", h.page_size);
            let _ = writeln!(s, "request_size = {}", h.request_size);
            let _ = writeln!(s, "\n[profile]");
            let _ = writeln!(s, "think_time_mean = {}", fmt_f64(h.think_time_mean));
            if let Some(n) = h.repeat_count {
                let _ = writeln!(s, "repeat_count = {n}");
            }
        }
        Workload::Ftp(f) => {
            let _ = writeln!(s, "kind = ftp");
            let _ = writeln!(s, "file_size = {}", f.file_size);
            let dir = match f.direction {
                TransferDirection::Down => "down",
                TransferDirection::Up => "up",
            };
            let _ = writeln!(s, "direction = {dir}");
            let _ = writeln!(s, "\n[profile]");
            let _ = writeln!(s, "think_time_mean = {}", fmt_f64(f.think_time_mean));
        }
    }

    let d = &cfg.des;
    let _ = writeln!(s, "\n[des]");
    let _ = writeln!(s, "base_service_us = {}", fmt_scaled(d.base_service, 1_000));
    let _ = writeln!(s, "tunnel_surcharge_us = {}", fmt_scaled(d.tunnel_surcharge, 1_000));
    let _ = writeln!(
        s,
        "translate_surcharge_us = {}",
        fmt_scaled(d.translate_surcharge, 1_000)
    );
    let _ = writeln!(s, "lookup_surcharge_us = {}", fmt_scaled(d.lookup_surcharge, 1_000));
    let _ = writeln!(s, "queue_capacity = {}", d.queue_capacity);
    let _ = writeln!(s, "mss = {}", d.tcp.mss);
    let _ = writeln!(s, "max_window = {}", d.tcp.max_window);
    let _ = writeln!(s, "min_rto_ms = {}", fmt_scaled(d.tcp.min_rto, 1_000_000));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIXTO4: &str = "\
[run]
phase = 6to4

[addressing]
lan_v6 = 2002:192.168.1.1:1::/64
router_a_v4 = 192.168.1.1
router_a_v6 = 2002:192.168.1.1:1::1
router_b_v4 = 10.1.1.1
router_b_v6 = 2002:10.1.1.1:a::1

[tunnel]
router_a.tunnel_type = 6to4
router_a.tunnel_source = 192.168.1.1
router_a.address = 2002:192.168.1.1:d::1
router_a.prefix = 128
router_b.tunnel_type = 6to4
router_b.tunnel_source = 10.1.1.1
router_b.address = 2002:10.1.1.1:b::1
router_b.prefix = 128
";

    fn kind_at(text: &str) -> (usize, ScenarioErrorKind) {
        let e = parse_scenario(text).unwrap_err();
        (e.line, e.kind)
    }

    #[test]
    fn sixto4_router_table_loads() {
        let cfg = parse_scenario(SIXTO4).unwrap();
        assert_eq!(cfg.run.phase, MechanismPhase::SixToFour);
        assert_eq!(
            cfg.tunnel.router_a.unwrap().tunnel_address().to_string(),
            "2002:c0a8:101:d::1"
        );
    }

    #[test]
    fn manual_without_destination_fails() {
        let text = "[run]\nphase = manual\n[tunnel]\nrouter_a.tunnel_type = manual\nrouter_a.tunnel_source = 192.168.1.1\nrouter_a.address = 2002:192.168.1.1:d::1\n";
        let (line, kind) = kind_at(text);
        assert_eq!(kind, ScenarioErrorKind::Missing("tunnel_destination"));
        assert_eq!(line, 4);
    }

    #[test]
    fn duplicate_address_fails_with_line() {
        let text = "[run]\nphase = ipv4\n[addressing]\nrouter_a_v4 = 10.1.1.1\n";
        let (line, kind) = kind_at(text);
        assert_eq!(kind, ScenarioErrorKind::DuplicateAddress("10.1.1.1".into()));
        // reported against the key that is in the file
        assert_eq!(line, 4);
    }

    #[test]
    fn duplicate_tunnel_address_points_at_key() {
        let text = SIXTO4.replace(
            "router_b.address = 2002:10.1.1.1:b::1",
            "router_b.address = 2002:192.168.1.1:d::1",
        );
        let (line, kind) = kind_at(&text);
        assert!(matches!(kind, ScenarioErrorKind::DuplicateAddress(_)));
        assert_eq!(line, 18);
    }

    #[test]
    fn unknown_key_reports_line() {
        let (line, kind) = kind_at("[run]\nphase = ipv4\ncolour = blue\n");
        assert_eq!((line, kind), (3, ScenarioErrorKind::UnknownKey("colour".into())));
    }

    #[test]
    fn malformed_address_reports_token() {
        let (line, kind) = kind_at("[run]\nphase = ipv4\n[addressing]\nrouter_a_v4 = 192.168.1.300\n");
        assert_eq!(line, 4);
        match kind {
            ScenarioErrorKind::Address(e) => assert_eq!(e.token, "300"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sixto4_prefix_must_embed_router_address() {
        let text = SIXTO4.replace("lan_v6 = 2002:192.168.1.1:1::/64", "lan_v6 = 2002:192.168.9.9:1::/64");
        let (line, kind) = kind_at(&text);
        assert_eq!(line, 5);
        assert!(matches!(kind, ScenarioErrorKind::PhaseMismatch(_)));
    }

    #[test]
    fn native_phase_rejects_tunnels() {
        let text = SIXTO4.replace("phase = 6to4", "phase = ipv6");
        assert!(matches!(kind_at(&text).1, ScenarioErrorKind::PhaseMismatch(_)));
    }

    #[test]
    fn tunnel_type_must_match_phase() {
        let text = SIXTO4.replace(
            "router_b.tunnel_type = 6to4",
            "router_b.tunnel_type = manual\nrouter_b.tunnel_destination = 192.168.1.1",
        );
        let (line, kind) = kind_at(&text);
        assert!(matches!(kind, ScenarioErrorKind::PhaseMismatch(_)));
        assert_eq!(line, 16);
    }

    #[test]
    fn missing_phase_and_bad_syntax() {
        assert_eq!(kind_at("[run]\nseed = 3\n").1, ScenarioErrorKind::Missing("phase"));
        assert_eq!(kind_at("phase = ipv4\n"), (1, ScenarioErrorKind::NoSection));
        assert_eq!(kind_at("[run]\nphase ipv4\n"), (2, ScenarioErrorKind::Syntax));
        assert_eq!(
            kind_at("[weather]\n"),
            (1, ScenarioErrorKind::UnknownSection("weather".into()))
        );
        assert_eq!(
            kind_at("[run]\nphase = ipv4\nphase = ipv6\n"),
            (3, ScenarioErrorKind::DuplicateKey("phase".into()))
        );
    }

    #[test]
    fn application_keys_follow_kind() {
        let (line, _) = kind_at("[run]\nphase = ipv4\n[application]\nkind = ftp\npage_size = 10\n");
        assert_eq!(line, 5);
        let cfg = parse_scenario("[run]\nphase = ipv4\n[application]\nfile_size = 5000\nkind = ftp\n").unwrap();
        assert!(matches!(cfg.workload, Workload::Ftp(f) if f.file_size == 5000));
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse_scenario("# header\n\n[run]  \nphase = dualstack # trailing\n seed = 9\n").unwrap();
        assert_eq!(cfg.run.seed, 9);
    }

    #[test]
    fn canonical_round_trip_all_phases() {
        for phase in MechanismPhase::ALL {
            let mut cfg = ScenarioConfig::reference(phase);
            cfg.run.data_rate = Some(2_000_000);
            cfg.des.lookup_surcharge = SimTime::from_nanos(1_500);
            let text = serialize_scenario(&cfg);
            let back = parse_scenario(&text).unwrap();
            assert_eq!(back, cfg, "{phase}");
            assert_eq!(serialize_scenario(&back), text);
        }
    }

    #[test]
    fn ftp_round_trip() {
        let cfg = parse_scenario(
            "[run]\nphase = ipv6\n[application]\nkind = ftp\ndirection = up\n[profile]\nthink_time_mean = 0.25\n",
        )
        .unwrap();
        let text = serialize_scenario(&cfg);
        assert_eq!(parse_scenario(&text).unwrap(), cfg);
        assert!(text.contains("direction = up"));
    }
}
