//! Experiment configuration files (TOML).
//!
//! Key tree:
//!
//! ```toml
//! policy = "cooperative"            # or "non-cooperative"
//!
//! [topology.generator]              # either a generator ...
//! scenario = "hotspot"              # "uniform" | "hotspot"
//! servers = 4
//! devices = 20
//! capacity_mips = 1000.0
//! hot_fraction = 0.8                # hotspot only
//! hot_radius = 5.0                  # hotspot only
//! region = { width = 100.0, height = 100.0 }
//!
//! # ... or explicit nodes
//! # [[topology.servers]]  id, x, y, capacity_mips
//! # [[topology.devices]]  id, x, y
//!
//! [topology.link]    # base_delay_ms, per_unit_delay_ms
//! [topology.cloud]   # x, y
//! [topology.proxy]   # x, y
//!
//! [workload.synthetic]              # either synthetic arrivals ...
//! rate_per_s = 0.1
//! p_thick = 0.3
//! horizon_ms = 600000.0             # defaults to simulation.horizon_ms
//! # csv = "jobs.csv"                # ... or a workload file
//! [workload.thick]   # length_mi, required_mips, payload_bytes
//! [workload.thin]
//!
//! [controller]       # decision_latency_ms, cloud_fallback, cloud_capacity_mips
//! [power]            # idle_w, max_w, curve, queue_overhead_mips_per_job
//! [simulation]       # horizon_ms, replications, base_seed
//! [output]           # dir, trace, charts
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::fog::{DeviceId, LinkParams, Location, ServerId};
use crate::policy::PolicyKind;
use crate::power::{PowerCurve, PowerParams};
use crate::sim::{
    declared_devices, DeviceSpec, Experiment, GeneratorSpec, ServerSpec, TopologySource,
    WorkloadSource,
};
use crate::workload::{ingest_csv, ClassName, JobClass, Scenario, WorkloadSpec};

pub const DEFAULT_HORIZON_MS: f64 = 600_000.0;
pub const DEFAULT_REPLICATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub trace: bool,
    pub charts: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            trace: false,
            charts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub policy: PolicyKind,
    pub replications: usize,
    pub base_seed: u64,
    pub output: OutputConfig,
}

/// One problem found in a config file, located by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Reads and validates a config file. Relative paths inside it resolve
/// against the file's directory.
pub fn validate(path: &Path) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![ConfigIssue {
            path: String::new(),
            message: format!("cannot read {}: {e}", path.display()),
        }]
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_str(&text, base)
}

/// Validates config text, reporting every violation rather than the first.
pub fn parse_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        vec![ConfigIssue {
            path: String::new(),
            message: format!("not valid TOML: {}", e.message()),
        }]
    })?;
    let mut cx = Checker::default();
    let config = cx.config(&root, base_dir);
    if cx.issues.is_empty() {
        Ok(config.expect("no issues implies a config"))
    } else {
        Err(cx.issues)
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

#[derive(Default)]
struct Checker {
    issues: Vec<ConfigIssue>,
}

impl Checker {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn keys(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for key in t.keys() {
            if !allowed.contains(&key.as_str()) {
                self.issue(join(path, key), "unknown key");
            }
        }
    }

    fn mismatch(&mut self, path: String, expected: &str, v: &Value) {
        self.issue(path, format!("expected {expected}, found {}", type_name(v)));
    }

    fn table<'t>(&mut self, t: &'t Table, key: &str, path: &str) -> Option<&'t Table> {
        match t.get(key)? {
            Value::Table(inner) => Some(inner),
            other => {
                self.mismatch(join(path, key), "table", other);
                None
            }
        }
    }

    fn array<'t>(&mut self, t: &'t Table, key: &str, path: &str) -> Option<&'t Vec<Value>> {
        match t.get(key)? {
            Value::Array(items) => Some(items),
            other => {
                self.mismatch(join(path, key), "array of tables", other);
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, key: &str, path: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.mismatch(join(path, key), "number", other);
                None
            }
        }
    }

    fn int(&mut self, t: &Table, key: &str, path: &str) -> Option<i64> {
        match t.get(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.mismatch(join(path, key), "integer", other);
                None
            }
        }
    }

    fn bool(&mut self, t: &Table, key: &str, path: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.mismatch(join(path, key), "boolean", other);
                None
            }
        }
    }

    fn str<'t>(&mut self, t: &'t Table, key: &str, path: &str) -> Option<&'t str> {
        match t.get(key)? {
            Value::String(s) => Some(s),
            other => {
                self.mismatch(join(path, key), "string", other);
                None
            }
        }
    }

    /// Number that must satisfy `ok`, else `rule` is reported.
    fn f64_where(
        &mut self,
        t: &Table,
        key: &str,
        path: &str,
        default: f64,
        ok: impl Fn(f64) -> bool,
        rule: &str,
    ) -> f64 {
        match self.f64(t, key, path) {
            Some(v) if v.is_finite() && ok(v) => v,
            Some(_) => {
                self.issue(join(path, key), rule);
                default
            }
            None => default,
        }
    }

    fn count(&mut self, t: &Table, key: &str, path: &str, default: usize, min: usize) -> usize {
        match self.int(t, key, path) {
            Some(v) if v >= min as i64 => v as usize,
            Some(_) => {
                self.issue(join(path, key), format!("must be >= {min}"));
                default
            }
            None => default,
        }
    }

    fn config(&mut self, root: &Table, base_dir: &Path) -> Option<ExperimentConfig> {
        self.keys(
            root,
            "",
            &[
                "policy",
                "topology",
                "workload",
                "controller",
                "power",
                "simulation",
                "output",
            ],
        );
        let policy = match self.str(root, "policy", "") {
            Some(s) => s.parse().unwrap_or_else(|e: String| {
                self.issue("policy", e);
                PolicyKind::Cooperative
            }),
            None => PolicyKind::Cooperative,
        };

        let empty = Table::new();
        let sim = self.table(root, "simulation", "").unwrap_or(&empty);
        self.keys(
            sim,
            "simulation",
            &["horizon_ms", "replications", "base_seed"],
        );
        let horizon_ms = self.f64_where(
            sim,
            "horizon_ms",
            "simulation",
            DEFAULT_HORIZON_MS,
            |v| v > 0.0,
            "must be > 0",
        );
        let replications = self.count(sim, "replications", "simulation", DEFAULT_REPLICATIONS, 1);
        let base_seed = match self.int(sim, "base_seed", "simulation") {
            Some(v) if v >= 0 => v as u64,
            Some(_) => {
                self.issue("simulation.base_seed", "must be non-negative");
                0
            }
            None => 0,
        };

        let topo = self.table(root, "topology", "");
        let (topology, link, cloud_location, proxy_location) = self.topology(topo);
        let workload_table = self.table(root, "workload", "");
        let workload = self.workload(workload_table, horizon_ms, topology.as_ref(), base_dir);
        let controller = self.table(root, "controller", "").unwrap_or(&empty);
        self.keys(
            controller,
            "controller",
            &[
                "decision_latency_ms",
                "cloud_fallback",
                "cloud_capacity_mips",
            ],
        );
        let decision_latency_ms = self.f64_where(
            controller,
            "decision_latency_ms",
            "controller",
            1.0,
            |v| v >= 0.0,
            "must be >= 0",
        );
        let fallback = self
            .bool(controller, "cloud_fallback", "controller")
            .unwrap_or(false);
        let cloud_capacity = self.f64_where(
            controller,
            "cloud_capacity_mips",
            "controller",
            100_000.0,
            |v| v > 0.0,
            "must be > 0",
        );

        let power = self.power(root);
        let output = self.output(root, base_dir);

        let experiment = Experiment {
            topology: topology?,
            workload: workload?,
            link,
            power,
            decision_latency_ms,
            cloud_fallback_mips: fallback.then_some(cloud_capacity),
            cloud_location,
            proxy_location,
            horizon_ms,
        };
        Some(ExperimentConfig {
            experiment,
            policy,
            replications,
            base_seed,
            output,
        })
    }

    fn location(&mut self, t: &Table, path: &str) -> Option<Location> {
        self.keys(t, path, &["x", "y"]);
        let x = self.f64(t, "x", path);
        let y = self.f64(t, "y", path);
        match (x, y) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Some(Location::new(x, y)),
            (Some(_), Some(_)) => {
                self.issue(path, "coordinates must be finite");
                None
            }
            _ => {
                for (k, v) in [("x", x), ("y", y)] {
                    if v.is_none() && !t.contains_key(k) {
                        self.issue(join(path, k), "missing");
                    }
                }
                None
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn topology(
        &mut self,
        topo: Option<&Table>,
    ) -> (
        Option<TopologySource>,
        LinkParams,
        Option<Location>,
        Option<Location>,
    ) {
        let Some(topo) = topo else {
            self.issue(
                "topology",
                "missing: give topology.generator or topology.servers/devices",
            );
            return (None, LinkParams::default(), None, None);
        };
        self.keys(
            topo,
            "topology",
            &["generator", "servers", "devices", "link", "cloud", "proxy"],
        );

        let mut link = LinkParams::default();
        if let Some(t) = self.table(topo, "link", "topology") {
            self.keys(t, "topology.link", &["base_delay_ms", "per_unit_delay_ms"]);
            link.base_delay_ms = self.f64_where(
                t,
                "base_delay_ms",
                "topology.link",
                link.base_delay_ms,
                |v| v >= 0.0,
                "must be >= 0",
            );
            link.per_unit_delay_ms = self.f64_where(
                t,
                "per_unit_delay_ms",
                "topology.link",
                link.per_unit_delay_ms,
                |v| v >= 0.0,
                "must be >= 0",
            );
        }
        let cloud = self
            .table(topo, "cloud", "topology")
            .and_then(|t| self.location(t, "topology.cloud"));
        let proxy = self
            .table(topo, "proxy", "topology")
            .and_then(|t| self.location(t, "topology.proxy"));

        let generator = self.table(topo, "generator", "topology");
        let explicit = topo.contains_key("servers") || topo.contains_key("devices");
        let source = match (generator, explicit) {
            (Some(_), true) => {
                self.issue(
                    "topology",
                    "topology.generator and explicit topology.servers/devices are mutually exclusive",
                );
                None
            }
            (None, false) => {
                if !topo.contains_key("generator") {
                    self.issue(
                        "topology",
                        "one of topology.generator or topology.servers/devices is required",
                    );
                }
                None
            }
            (Some(g), false) => self.generator(g).map(TopologySource::Generated),
            (None, true) => self.explicit(topo),
        };
        (source, link, cloud, proxy)
    }

    fn generator(&mut self, g: &Table) -> Option<GeneratorSpec> {
        let path = "topology.generator";
        self.keys(
            g,
            path,
            &[
                "scenario",
                "servers",
                "devices",
                "capacity_mips",
                "hot_fraction",
                "hot_radius",
                "region",
            ],
        );
        let defaults = GeneratorSpec::default();
        let scenario_name = self.str(g, "scenario", path).unwrap_or("uniform");
        let hot_fraction = self.f64_where(
            g,
            "hot_fraction",
            path,
            0.8,
            |v| (0.0..=1.0).contains(&v),
            "must be in [0, 1]",
        );
        let hot_radius = self.f64_where(g, "hot_radius", path, 5.0, |v| v >= 0.0, "must be >= 0");
        let scenario = match scenario_name {
            "uniform" => {
                for key in ["hot_fraction", "hot_radius"] {
                    if g.contains_key(key) {
                        self.issue(join(path, key), "only valid with scenario = \"hotspot\"");
                    }
                }
                Scenario::Uniform
            }
            "hotspot" => Scenario::Hotspot {
                hot_fraction,
                hot_radius,
            },
            other => {
                self.issue(
                    join(path, "scenario"),
                    format!("unknown scenario `{other}` (uniform|hotspot)"),
                );
                Scenario::Uniform
            }
        };
        let mut region = defaults.region;
        if let Some(r) = self.table(g, "region", path) {
            let rpath = "topology.generator.region";
            self.keys(r, rpath, &["width", "height"]);
            region.width =
                self.f64_where(r, "width", rpath, region.width, |v| v > 0.0, "must be > 0");
            region.height = self.f64_where(
                r,
                "height",
                rpath,
                region.height,
                |v| v > 0.0,
                "must be > 0",
            );
        }
        Some(GeneratorSpec {
            scenario,
            n_servers: self.count(g, "servers", path, defaults.n_servers, 1),
            n_devices: self.count(g, "devices", path, defaults.n_devices, 1),
            region,
            capacity_mips: self.f64_where(
                g,
                "capacity_mips",
                path,
                defaults.capacity_mips,
                |v| v > 0.0,
                "must be > 0",
            ),
        })
    }

    fn node_id(&mut self, t: &Table, path: &str) -> Option<u32> {
        match self.int(t, "id", path) {
            Some(v) if (0..=u32::MAX as i64).contains(&v) => Some(v as u32),
            Some(_) => {
                self.issue(join(path, "id"), "must fit in an unsigned 32-bit integer");
                None
            }
            None => {
                if !t.contains_key("id") {
                    self.issue(join(path, "id"), "missing");
                }
                None
            }
        }
    }

    fn explicit(&mut self, topo: &Table) -> Option<TopologySource> {
        let mut ok = true;
        let mut servers = Vec::new();
        let mut devices = Vec::new();
        let mut ids = std::collections::HashSet::new();
        let server_items = self.array(topo, "servers", "topology");
        let device_items = self.array(topo, "devices", "topology");
        if server_items.is_none_or(|s| s.is_empty()) {
            self.issue("topology.servers", "at least one server is required");
            ok = false;
        }
        if device_items.is_none_or(|d| d.is_empty()) {
            self.issue("topology.devices", "at least one device is required");
            ok = false;
        }
        for (kind, items) in [("servers", server_items), ("devices", device_items)] {
            for (i, item) in items.into_iter().flatten().enumerate() {
                let path = format!("topology.{kind}[{i}]");
                let Value::Table(t) = item else {
                    self.mismatch(path, "table", item);
                    ok = false;
                    continue;
                };
                let allowed: &[&str] = if kind == "servers" {
                    &["id", "x", "y", "capacity_mips"]
                } else {
                    &["id", "x", "y"]
                };
                self.keys(t, &path, allowed);
                let id = self.node_id(t, &path);
                let mut loc_table = t.clone();
                loc_table.retain(|k, _| k == "x" || k == "y");
                let location = self.location(&loc_table, &path);
                if let Some(id) = id {
                    if !ids.insert(id) {
                        self.issue(join(&path, "id"), format!("duplicate node id {id}"));
                        ok = false;
                    }
                }
                match (kind, id, location) {
                    ("servers", Some(id), Some(location)) => {
                        let capacity_mips = self.f64_where(
                            t,
                            "capacity_mips",
                            &path,
                            1000.0,
                            |v| v > 0.0,
                            "must be > 0",
                        );
                        servers.push(ServerSpec {
                            id: ServerId(id),
                            location,
                            capacity_mips,
                        });
                    }
                    ("devices", Some(id), Some(location)) => devices.push(DeviceSpec {
                        id: DeviceId(id),
                        location,
                    }),
                    _ => ok = false,
                }
            }
        }
        ok.then_some(TopologySource::Explicit { servers, devices })
    }

    fn job_class(&mut self, w: &Table, key: &str, default: JobClass) -> JobClass {
        let Some(t) = self.table(w, key, "workload") else {
            return default;
        };
        let path = join("workload", key);
        self.keys(t, &path, &["length_mi", "required_mips", "payload_bytes"]);
        let payload_bytes = match self.int(t, "payload_bytes", &path) {
            Some(v) if v >= 0 => v as u64,
            Some(_) => {
                self.issue(join(&path, "payload_bytes"), "must be >= 0");
                default.payload_bytes
            }
            None => default.payload_bytes,
        };
        JobClass {
            name: default.name,
            length_mi: self.f64_where(
                t,
                "length_mi",
                &path,
                default.length_mi,
                |v| v > 0.0,
                "must be > 0",
            ),
            required_mips: self.f64_where(
                t,
                "required_mips",
                &path,
                default.required_mips,
                |v| v > 0.0,
                "must be > 0",
            ),
            payload_bytes,
        }
    }

    fn workload(
        &mut self,
        w: Option<&Table>,
        horizon_ms: f64,
        topology: Option<&TopologySource>,
        base_dir: &Path,
    ) -> Option<WorkloadSource> {
        let empty = Table::new();
        let w = w.unwrap_or(&empty);
        self.keys(w, "workload", &["synthetic", "csv", "thick", "thin"]);
        let thick = self.job_class(w, "thick", JobClass::default_thick());
        let thin = self.job_class(w, "thin", JobClass::default_thin());
        debug_assert!(thick.name == ClassName::Thick && thin.name == ClassName::Thin);

        let synthetic = self.table(w, "synthetic", "workload");
        let csv = self.str(w, "csv", "workload");
        if synthetic.is_some() && csv.is_some() {
            self.issue(
                "workload",
                "workload.synthetic and workload.csv are mutually exclusive",
            );
            return None;
        }
        if let Some(csv) = csv {
            let path = base_dir.join(csv);
            let known = topology.map(declared_devices);
            return match ingest_csv(&path, known.as_ref()) {
                Ok(ingested) => Some(WorkloadSource::Fixed(ingested.jobs)),
                Err(e) => {
                    self.issue("workload.csv", format!("{}: {e}", path.display()));
                    None
                }
            };
        }
        let s = synthetic.unwrap_or(&empty);
        let path = "workload.synthetic";
        self.keys(s, path, &["rate_per_s", "p_thick", "horizon_ms"]);
        let defaults = WorkloadSpec::default();
        Some(WorkloadSource::Synthetic(WorkloadSpec {
            rate_per_s: self.f64_where(
                s,
                "rate_per_s",
                path,
                defaults.rate_per_s,
                |v| v >= 0.0,
                "must be >= 0",
            ),
            p_thick: self.f64_where(
                s,
                "p_thick",
                path,
                defaults.p_thick,
                |v| (0.0..=1.0).contains(&v),
                "must be in [0, 1]",
            ),
            horizon_ms: self.f64_where(
                s,
                "horizon_ms",
                path,
                horizon_ms,
                |v| v >= 0.0,
                "must be >= 0",
            ),
            seed: 0,
            thick,
            thin,
        }))
    }

    fn power(&mut self, root: &Table) -> PowerParams {
        let mut p = PowerParams::default();
        let Some(t) = self.table(root, "power", "") else {
            return p;
        };
        self.keys(
            t,
            "power",
            &["idle_w", "max_w", "curve", "queue_overhead_mips_per_job"],
        );
        p.idle_w = self.f64_where(t, "idle_w", "power", p.idle_w, |v| v >= 0.0, "must be >= 0");
        p.max_w = self.f64_where(t, "max_w", "power", p.max_w, |v| v >= 0.0, "must be >= 0");
        if p.max_w < p.idle_w {
            self.issue("power.max_w", "must be >= power.idle_w");
        }
        if let Some(c) = self.str(t, "curve", "power") {
            match c.parse::<PowerCurve>() {
                Ok(curve) => p.curve = curve,
                Err(e) => self.issue("power.curve", e),
            }
        }
        p.queue_overhead_mips_per_job = self.f64_where(
            t,
            "queue_overhead_mips_per_job",
            "power",
            0.0,
            |v| v >= 0.0,
            "must be >= 0",
        );
        p
    }

    fn output(&mut self, root: &Table, base_dir: &Path) -> OutputConfig {
        let mut out = OutputConfig::default();
        let Some(t) = self.table(root, "output", "") else {
            return out;
        };
        self.keys(t, "output", &["dir", "trace", "charts"]);
        out.dir = self.str(t, "dir", "output").map(|d| base_dir.join(d));
        out.trace = self.bool(t, "trace", "output").unwrap_or(out.trace);
        out.charts = self.bool(t, "charts", "output").unwrap_or(out.charts);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
        parse_str(text, Path::new("."))
    }

    fn paths(issues: &[ConfigIssue]) -> Vec<&str> {
        issues.iter().map(|i| i.path.as_str()).collect()
    }

    #[test]
    fn minimal_config_is_fully_defaulted() {
        let cfg =
            parse("policy = \"non-cooperative\"\n[topology.generator]\nscenario = \"hotspot\"\n")
                .unwrap();
        assert_eq!(cfg.policy, PolicyKind::NonCooperative);
        assert_eq!(cfg.replications, DEFAULT_REPLICATIONS);
        assert_eq!(cfg.experiment.horizon_ms, DEFAULT_HORIZON_MS);
        assert_eq!(cfg.experiment.power, PowerParams::default());
        assert_eq!(cfg.experiment.decision_latency_ms, 1.0);
        assert_eq!(cfg.experiment.cloud_fallback_mips, None);
        match &cfg.experiment.topology {
            TopologySource::Generated(g) => {
                assert_eq!(
                    g.scenario,
                    Scenario::Hotspot {
                        hot_fraction: 0.8,
                        hot_radius: 5.0
                    }
                );
                assert_eq!((g.n_servers, g.n_devices), (4, 20));
            }
            other => panic!("unexpected topology {other:?}"),
        }
        match &cfg.experiment.workload {
            WorkloadSource::Synthetic(w) => {
                assert_eq!(w.horizon_ms, DEFAULT_HORIZON_MS);
                assert_eq!(w.thick, JobClass::default_thick());
            }
            other => panic!("unexpected workload {other:?}"),
        }
        assert!(cfg.output.charts && !cfg.output.trace);
    }

    #[test]
    fn zero_replications_names_key() {
        let err = parse("[topology.generator]\n[simulation]\nreplications = 0\n").unwrap_err();
        assert_eq!(paths(&err), vec!["simulation.replications"]);
    }

    #[test]
    fn generator_and_explicit_are_exclusive() {
        let text = r#"
[topology.generator]
scenario = "uniform"
[[topology.servers]]
id = 1
x = 0
y = 0
[[topology.devices]]
id = 2
x = 0
y = 1
"#;
        let err = parse(text).unwrap_err();
        assert!(
            err.iter().any(|i| i.message.contains("mutually exclusive")),
            "{err:?}"
        );
    }

    #[test]
    fn all_errors_are_collected() {
        let text = r#"
policy = "greedy"
colour = "blue"
[topology.generator]
servers = "four"
[simulation]
horizon_ms = -1
replications = 0
[power]
idle_w = 300
max_w = 200
curve = "cubic"
"#;
        let err = parse(text).unwrap_err();
        let p = paths(&err);
        for expected in [
            "policy",
            "colour",
            "topology.generator.servers",
            "simulation.horizon_ms",
            "simulation.replications",
            "power.max_w",
            "power.curve",
        ] {
            assert!(p.contains(&expected), "missing {expected} in {p:?}");
        }
        let servers = err
            .iter()
            .find(|i| i.path == "topology.generator.servers")
            .unwrap();
        assert!(servers.message.contains("expected integer, found string"));
    }

    #[test]
    fn explicit_topology_parses() {
        let text = r#"
policy = "cooperative"
[[topology.servers]]
id = 1
x = 0
y = 0
capacity_mips = 1000
[[topology.servers]]
id = 2
x = 0
y = 10
[[topology.devices]]
id = 3
x = 0
y = 1
[topology.link]
base_delay_ms = 0.5
per_unit_delay_ms = 1.0
[workload.synthetic]
rate_per_s = 0
"#;
        let cfg = parse(text).unwrap();
        match cfg.experiment.topology {
            TopologySource::Explicit { servers, devices } => {
                assert_eq!(servers.len(), 2);
                assert_eq!(servers[1].capacity_mips, 1000.0);
                assert_eq!(devices[0].location, Location::new(0.0, 1.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_duplicate_ids_and_missing_coordinates() {
        let text = r#"
[[topology.servers]]
id = 1
x = 0
[[topology.devices]]
id = 1
x = 0
y = 1
"#;
        let err = parse(text).unwrap_err();
        let p = paths(&err);
        assert!(p.contains(&"topology.servers[0].y"), "{p:?}");
        assert!(p.contains(&"topology.devices[0].id"), "{p:?}");
    }

    #[test]
    fn missing_topology_and_conflicting_workload() {
        let err = parse("[workload]\ncsv = \"x.csv\"\n[workload.synthetic]\nrate_per_s = 1\n")
            .unwrap_err();
        let p = paths(&err);
        assert!(p.contains(&"topology"));
        assert!(p.contains(&"workload"));
    }

    #[test]
    fn bad_toml_is_one_issue() {
        let err = parse("policy = = 3").unwrap_err();
        assert_eq!(err.len(), 1);
        assert!(err[0].message.starts_with("not valid TOML"));
    }
}
