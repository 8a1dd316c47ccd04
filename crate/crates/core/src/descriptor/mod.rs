//! The three-level descriptor model: VNFDs describe the VDUs (VMs) a network
//! function is built from, NSDs group VNFDs into services with external
//! connection points, and one NSID chains service segments into an
//! end-to-end slice.
//!
//! Everything in this module is a pure function over immutable inputs.

pub mod grammar;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use grammar::{Scalar, Value};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("invariant: {0}")]
    Invariant(String),
}

fn syntax(msg: impl Into<String>) -> ParseError {
    ParseError::Syntax(msg.into())
}

fn invariant(msg: impl Into<String>) -> ParseError {
    ParseError::Invariant(msg.into())
}

/// Per-VDU resource demand: CPU count, memory in MB, storage in GB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flavor {
    pub vcpus: u64,
    pub memory_mb: u64,
    pub storage_gb: u64,
}

/// Resource totals summed over flavors. Same axes as [`Flavor`], different role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResourceVector {
    pub vcpus: u64,
    pub memory_mb: u64,
    pub storage_gb: u64,
}

impl ResourceVector {
    pub fn add(&mut self, flavor: &Flavor) {
        self.vcpus += flavor.vcpus;
        self.memory_mb += flavor.memory_mb;
        self.storage_gb += flavor.storage_gb;
    }

    pub fn sub(&mut self, flavor: &Flavor) {
        self.vcpus -= flavor.vcpus;
        self.memory_mb -= flavor.memory_mb;
        self.storage_gb -= flavor.storage_gb;
    }

    pub fn is_zero(&self) -> bool {
        self.vcpus == 0 && self.memory_mb == 0 && self.storage_gb == 0
    }

    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.vcpus <= other.vcpus && self.memory_mb <= other.memory_mb && self.storage_gb <= other.storage_gb
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceDef {
    pub name: String,
    /// Network this interface attaches to: the mgmt network, an internal vl
    /// of the owning VNFD, or an externally provided service network.
    pub network: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vdu {
    pub id: String,
    pub image: String,
    pub flavor: Flavor,
    pub interfaces: Vec<InterfaceDef>,
}

/// The closed metric vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricName {
    CpuUtilizationPct,
    MemoryUtilizationMb,
    ThroughputMbps,
}

impl MetricName {
    pub fn parse(s: &str) -> Option<MetricName> {
        match s {
            "cpu_utilization_pct" => Some(MetricName::CpuUtilizationPct),
            "memory_utilization_mb" => Some(MetricName::MemoryUtilizationMb),
            "throughput_mbps" => Some(MetricName::ThroughputMbps),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::CpuUtilizationPct => "cpu_utilization_pct",
            MetricName::MemoryUtilizationMb => "memory_utilization_mb",
            MetricName::ThroughputMbps => "throughput_mbps",
        }
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: MetricName,
    pub target_vdu: String,
    pub collection_period_s: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vnfd {
    pub id: String,
    pub mgmt_network: String,
    pub vdus: Vec<Vdu>,
    /// Internal virtual link names. Membership is derived: an interface is on
    /// a vl when its `network` names it. Each vl must gather >= 2 interfaces.
    pub internal_vls: Vec<String>,
    pub metrics: Vec<MetricSpec>,
    pub day0: Vec<(String, String)>,
    pub day1: Vec<(String, String)>,
    pub day2: Vec<(String, String)>,
    /// Keys the parser did not recognize, reported by validation.
    pub unknown_keys: Vec<String>,
}

impl Vnfd {
    /// Interfaces attached to the named internal vl, as (vdu id, interface name).
    pub fn vl_members(&self, vl: &str) -> Vec<(&str, &str)> {
        let mut members = Vec::new();
        for vdu in &self.vdus {
            for iface in &vdu.interfaces {
                if iface.network == vl {
                    members.push((vdu.id.as_str(), iface.name.as_str()));
                }
            }
        }
        members
    }

    /// VDUs declaring an interface with the given name.
    pub fn interface_owners(&self, interface: &str) -> Vec<&str> {
        self.vdus
            .iter()
            .filter(|vdu| vdu.interfaces.iter().any(|i| i.name == interface))
            .map(|vdu| vdu.id.as_str())
            .collect()
    }

    pub fn flavor_total(&self) -> ResourceVector {
        let mut total = ResourceVector::default();
        for vdu in &self.vdus {
            total.add(&vdu.flavor);
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpDef {
    pub name: String,
    pub vnfd: String,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nsd {
    pub id: String,
    pub vnfds: Vec<String>,
    pub cps: Vec<CpDef>,
    pub unknown_keys: Vec<String>,
}

/// One side of a chain link: an external cp of the segment at `segment`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub segment: usize,
    pub cp: String,
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.segment, self.cp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub from: Endpoint,
    pub to: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDef {
    pub nsd: String,
    pub vim: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nsid {
    pub id: String,
    pub segments: Vec<SegmentDef>,
    pub chain: Vec<ChainLink>,
    pub unknown_keys: Vec<String>,
}

/// The full three-level tree driving one slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorPackage {
    pub vnfds: Vec<Vnfd>,
    pub nsds: Vec<Nsd>,
    pub nsid: Nsid,
}

// ---------------------------------------------------------------------------
// Parsing: grammar tree -> typed descriptors
// ---------------------------------------------------------------------------

/// Tracks which keys of a record were consumed so the rest can be reported
/// as unknown-key findings.
pub(crate) struct Fields<'a> {
    path: String,
    entries: &'a [(String, Value)],
    used: Vec<bool>,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(path: impl Into<String>, value: &'a Value) -> Result<Fields<'a>, ParseError> {
        let path = path.into();
        match value {
            Value::Map(entries) => Ok(Fields {
                path,
                used: vec![false; entries.len()],
                entries,
            }),
            _ => Err(syntax(format!("{path}: expected a record"))),
        }
    }

    pub(crate) fn take(&mut self, key: &str) -> Option<&'a Value> {
        for (idx, (k, v)) in self.entries.iter().enumerate() {
            if k == key {
                self.used[idx] = true;
                return Some(v);
            }
        }
        None
    }

    pub(crate) fn req_string(&mut self, key: &str) -> Result<String, ParseError> {
        match self.take(key) {
            Some(Value::Scalar(s)) => Ok(s.as_str()),
            Some(_) => Err(syntax(format!("{}: key `{key}` must be a scalar", self.path))),
            None => Err(syntax(format!("{}: missing required key `{key}`", self.path))),
        }
    }

    pub(crate) fn opt_string(&mut self, key: &str) -> Result<Option<String>, ParseError> {
        match self.take(key) {
            Some(Value::Scalar(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(syntax(format!("{}: key `{key}` must be a scalar", self.path))),
            None => Ok(None),
        }
    }

    pub(crate) fn req_int(&mut self, key: &str) -> Result<u64, ParseError> {
        match self.take(key) {
            Some(Value::Scalar(Scalar::Int(n))) => Ok(*n),
            Some(_) => Err(syntax(format!(
                "{}: key `{key}` must be an unsigned integer",
                self.path
            ))),
            None => Err(syntax(format!("{}: missing required key `{key}`", self.path))),
        }
    }

    pub(crate) fn opt_int(&mut self, key: &str) -> Result<Option<u64>, ParseError> {
        match self.take(key) {
            Some(Value::Scalar(Scalar::Int(n))) => Ok(Some(*n)),
            Some(_) => Err(syntax(format!(
                "{}: key `{key}` must be an unsigned integer",
                self.path
            ))),
            None => Ok(None),
        }
    }

    pub(crate) fn req_list(&mut self, key: &str) -> Result<&'a [Value], ParseError> {
        match self.take(key) {
            Some(Value::List(items)) => Ok(items),
            Some(_) => Err(syntax(format!("{}: key `{key}` must be a list", self.path))),
            None => Err(syntax(format!("{}: missing required key `{key}`", self.path))),
        }
    }

    pub(crate) fn opt_list(&mut self, key: &str) -> Result<&'a [Value], ParseError> {
        match self.take(key) {
            Some(Value::List(items)) => Ok(items),
            Some(_) => Err(syntax(format!("{}: key `{key}` must be a list", self.path))),
            None => Ok(&[]),
        }
    }

    /// Scalar-to-scalar parameter map (day-0/1/2 hooks), order preserved.
    fn opt_params(&mut self, key: &str) -> Result<Vec<(String, String)>, ParseError> {
        match self.take(key) {
            Some(Value::Map(entries)) => {
                let mut params = Vec::new();
                for (k, v) in entries {
                    match v {
                        Value::Scalar(s) => params.push((k.clone(), s.as_str())),
                        _ => return Err(syntax(format!("{}: parameter `{key}.{k}` must be a scalar", self.path))),
                    }
                }
                Ok(params)
            }
            Some(_) => Err(syntax(format!("{}: key `{key}` must be a parameter map", self.path))),
            None => Ok(Vec::new()),
        }
    }

    fn collect_unknown(&self, out: &mut Vec<String>) {
        for (idx, (k, _)) in self.entries.iter().enumerate() {
            if !self.used[idx] {
                if self.path.is_empty() {
                    out.push(k.clone());
                } else {
                    out.push(format!("{}.{k}", self.path));
                }
            }
        }
    }
}

fn expect_kind(fields: &mut Fields<'_>, expected: &str) -> Result<(), ParseError> {
    let kind = fields.req_string("kind")?;
    if kind != expected {
        return Err(syntax(format!("expected `kind: {expected}`, found `kind: {kind}`")));
    }
    Ok(())
}

fn scalar_item(value: &Value, path: &str) -> Result<String, ParseError> {
    match value {
        Value::Scalar(s) => Ok(s.as_str()),
        _ => Err(syntax(format!("{path}: expected a scalar list item"))),
    }
}

fn parse_vnfd_value(value: &Value) -> Result<Vnfd, ParseError> {
    let mut unknown = Vec::new();
    let mut top = Fields::new("", value)?;
    expect_kind(&mut top, "vnfd")?;
    let id = top.req_string("id")?;
    let mgmt_network = top.req_string("mgmt-network")?;

    let mut vdus = Vec::new();
    for (idx, item) in top.req_list("vdus")?.iter().enumerate() {
        let path = format!("vdus[{idx}]");
        let mut f = Fields::new(path.clone(), item)?;
        let vdu_id = f.req_string("id")?;
        let image = f.req_string("image")?;
        let flavor = Flavor {
            vcpus: f.req_int("vcpus")?,
            memory_mb: f.req_int("memory-mb")?,
            storage_gb: f.req_int("storage-gb")?,
        };
        let mut interfaces = Vec::new();
        for (j, iface) in f.req_list("interfaces")?.iter().enumerate() {
            let ipath = format!("{path}.interfaces[{j}]");
            let mut g = Fields::new(ipath, iface)?;
            interfaces.push(InterfaceDef {
                name: g.req_string("name")?,
                network: g.req_string("network")?,
            });
            g.collect_unknown(&mut unknown);
        }
        f.collect_unknown(&mut unknown);
        vdus.push(Vdu {
            id: vdu_id,
            image,
            flavor,
            interfaces,
        });
    }

    let mut internal_vls = Vec::new();
    for (idx, item) in top.opt_list("internal-vls")?.iter().enumerate() {
        internal_vls.push(scalar_item(item, &format!("internal-vls[{idx}]"))?);
    }

    let mut metrics = Vec::new();
    for (idx, item) in top.opt_list("metrics")?.iter().enumerate() {
        let path = format!("metrics[{idx}]");
        let mut f = Fields::new(path.clone(), item)?;
        let raw_name = f.req_string("name")?;
        let name = MetricName::parse(&raw_name).ok_or_else(|| {
            invariant(format!(
                "vnfd `{id}`: metric name `{raw_name}` is not in the metric vocabulary"
            ))
        })?;
        let target_vdu = f.req_string("vdu")?;
        let collection_period_s = f.opt_int("period-s")?.unwrap_or(1);
        f.collect_unknown(&mut unknown);
        metrics.push(MetricSpec {
            name,
            target_vdu,
            collection_period_s,
        });
    }

    let day0 = top.opt_params("day0")?;
    let day1 = top.opt_params("day1")?;
    let day2 = top.opt_params("day2")?;
    top.collect_unknown(&mut unknown);

    let vnfd = Vnfd {
        id,
        mgmt_network,
        vdus,
        internal_vls,
        metrics,
        day0,
        day1,
        day2,
        unknown_keys: unknown,
    };
    check_vnfd_invariants(&vnfd)?;
    Ok(vnfd)
}

fn check_vnfd_invariants(vnfd: &Vnfd) -> Result<(), ParseError> {
    let id = &vnfd.id;
    if vnfd.vdus.is_empty() {
        return Err(invariant(format!("vnfd `{id}`: must declare at least one vdu")));
    }
    let mut seen_vdus: BTreeSet<&str> = BTreeSet::new();
    for vdu in &vnfd.vdus {
        if !seen_vdus.insert(&vdu.id) {
            return Err(invariant(format!("vnfd `{id}`: duplicate vdu id `{}`", vdu.id)));
        }
        if vdu.flavor.vcpus == 0 || vdu.flavor.memory_mb == 0 || vdu.flavor.storage_gb == 0 {
            return Err(invariant(format!(
                "vnfd `{id}`: vdu `{}`: flavor fields must all be >= 1",
                vdu.id
            )));
        }
        let mut seen_ifaces: BTreeSet<&str> = BTreeSet::new();
        for iface in &vdu.interfaces {
            if !seen_ifaces.insert(&iface.name) {
                return Err(invariant(format!(
                    "vnfd `{id}`: vdu `{}`: duplicate interface name `{}`",
                    vdu.id, iface.name
                )));
            }
        }
        let mgmt_count = vdu.interfaces.iter().filter(|i| i.network == vnfd.mgmt_network).count();
        if mgmt_count != 1 {
            return Err(invariant(format!(
                "vnfd `{id}`: vdu `{}`: exactly one interface must reference mgmt network `{}` (found {mgmt_count})",
                vdu.id, vnfd.mgmt_network
            )));
        }
    }
    let mut seen_vls: BTreeSet<&str> = BTreeSet::new();
    for vl in &vnfd.internal_vls {
        if vl == &vnfd.mgmt_network {
            return Err(invariant(format!(
                "vnfd `{id}`: internal vl `{vl}` collides with the mgmt network name"
            )));
        }
        if !seen_vls.insert(vl) {
            return Err(invariant(format!("vnfd `{id}`: duplicate internal vl `{vl}`")));
        }
        let members = vnfd.vl_members(vl);
        if members.len() < 2 {
            return Err(invariant(format!(
                "vnfd `{id}`: internal vl `{vl}` must connect at least 2 vdu interfaces (found {})",
                members.len()
            )));
        }
    }
    for metric in &vnfd.metrics {
        if metric.collection_period_s == 0 {
            return Err(invariant(format!(
                "vnfd `{id}`: metric `{}`: collection period must be >= 1",
                metric.name
            )));
        }
        if !vnfd.vdus.iter().any(|v| v.id == metric.target_vdu) {
            return Err(invariant(format!(
                "vnfd `{id}`: metric `{}` targets unknown vdu `{}`",
                metric.name, metric.target_vdu
            )));
        }
    }
    Ok(())
}

fn parse_nsd_value(value: &Value) -> Result<Nsd, ParseError> {
    let mut unknown = Vec::new();
    let mut top = Fields::new("", value)?;
    expect_kind(&mut top, "nsd")?;
    let id = top.req_string("id")?;

    let mut vnfds = Vec::new();
    for (idx, item) in top.req_list("vnfds")?.iter().enumerate() {
        vnfds.push(scalar_item(item, &format!("vnfds[{idx}]"))?);
    }

    let mut cps = Vec::new();
    for (idx, item) in top.opt_list("cps")?.iter().enumerate() {
        let path = format!("cps[{idx}]");
        let mut f = Fields::new(path, item)?;
        cps.push(CpDef {
            name: f.req_string("name")?,
            vnfd: f.req_string("vnfd")?,
            interface: f.req_string("interface")?,
        });
        f.collect_unknown(&mut unknown);
    }
    top.collect_unknown(&mut unknown);

    let nsd = Nsd {
        id,
        vnfds,
        cps,
        unknown_keys: unknown,
    };
    check_nsd_invariants(&nsd)?;
    Ok(nsd)
}

fn check_nsd_invariants(nsd: &Nsd) -> Result<(), ParseError> {
    let id = &nsd.id;
    if nsd.vnfds.is_empty() {
        return Err(invariant(format!("nsd `{id}`: must reference at least one vnfd")));
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for v in &nsd.vnfds {
        if !seen.insert(v) {
            return Err(invariant(format!("nsd `{id}`: duplicate constituent vnfd `{v}`")));
        }
    }
    let mut seen_cps: BTreeSet<&str> = BTreeSet::new();
    for cp in &nsd.cps {
        if !seen_cps.insert(&cp.name) {
            return Err(invariant(format!("nsd `{id}`: duplicate cp name `{}`", cp.name)));
        }
        if !nsd.vnfds.iter().any(|v| v == &cp.vnfd) {
            return Err(invariant(format!(
                "nsd `{id}`: cp `{}` names vnfd `{}` which is not a constituent",
                cp.name, cp.vnfd
            )));
        }
    }
    Ok(())
}

fn parse_endpoint(text: &str) -> Result<Endpoint, ParseError> {
    let (idx, cp) = text.split_once('.').ok_or_else(|| {
        syntax(format!(
            "chain endpoint `{text}` must have the form `segment-index.cp-name`"
        ))
    })?;
    let segment = idx
        .parse::<usize>()
        .map_err(|_| syntax(format!("chain endpoint `{text}`: `{idx}` is not a segment index")))?;
    if cp.is_empty() {
        return Err(syntax(format!("chain endpoint `{text}`: empty cp name")));
    }
    Ok(Endpoint {
        segment,
        cp: cp.to_string(),
    })
}

fn parse_nsid_value(value: &Value) -> Result<Nsid, ParseError> {
    let mut unknown = Vec::new();
    let mut top = Fields::new("", value)?;
    expect_kind(&mut top, "nsid")?;
    let id = top.req_string("id")?;

    let mut segments = Vec::new();
    for (idx, item) in top.req_list("segments")?.iter().enumerate() {
        let path = format!("segments[{idx}]");
        let mut f = Fields::new(path, item)?;
        segments.push(SegmentDef {
            nsd: f.req_string("nsd")?,
            vim: f.opt_string("vim")?,
        });
        f.collect_unknown(&mut unknown);
    }

    let mut chain = Vec::new();
    for (idx, item) in top.opt_list("chain")?.iter().enumerate() {
        let path = format!("chain[{idx}]");
        let mut f = Fields::new(path, item)?;
        let from = parse_endpoint(&f.req_string("from")?)?;
        let to = parse_endpoint(&f.req_string("to")?)?;
        f.collect_unknown(&mut unknown);
        chain.push(ChainLink { from, to });
    }
    top.collect_unknown(&mut unknown);

    let nsid = Nsid {
        id,
        segments,
        chain,
        unknown_keys: unknown,
    };
    check_nsid_invariants(&nsid)?;
    Ok(nsid)
}

fn check_nsid_invariants(nsid: &Nsid) -> Result<(), ParseError> {
    let id = &nsid.id;
    if nsid.segments.is_empty() {
        return Err(invariant(format!("nsid `{id}`: must declare at least one segment")));
    }
    for link in &nsid.chain {
        for ep in [&link.from, &link.to] {
            if ep.segment >= nsid.segments.len() {
                return Err(invariant(format!(
                    "nsid `{id}`: chain endpoint `{ep}` references segment {} but only {} segments exist",
                    ep.segment,
                    nsid.segments.len()
                )));
            }
        }
    }
    // Connectivity of the chain graph over segments.
    let n = nsid.segments.len();
    let mut reached = vec![false; n];
    let mut stack = vec![0usize];
    reached[0] = true;
    while let Some(seg) = stack.pop() {
        for link in &nsid.chain {
            for (a, b) in [
                (link.from.segment, link.to.segment),
                (link.to.segment, link.from.segment),
            ] {
                if a == seg && !reached[b] {
                    reached[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    if let Some(unreached) = reached.iter().position(|r| !r) {
        return Err(invariant(format!(
            "nsid `{id}`: chain graph disconnected: segment {unreached} (`{}`) is unreachable",
            nsid.segments[unreached].nsd
        )));
    }
    Ok(())
}

pub(crate) fn parse_tree(text: &str) -> Result<Value, ParseError> {
    grammar::parse_document(text).map_err(|e| syntax(e.to_string()))
}

pub fn parse_vnfd(text: &str) -> Result<Vnfd, ParseError> {
    parse_vnfd_value(&parse_tree(text)?)
}

pub fn parse_nsd(text: &str) -> Result<Nsd, ParseError> {
    parse_nsd_value(&parse_tree(text)?)
}

pub fn parse_nsid(text: &str) -> Result<Nsid, ParseError> {
    parse_nsid_value(&parse_tree(text)?)
}

/// The `kind:` discriminator of a document, before full parsing.
pub fn document_kind(text: &str) -> Result<String, ParseError> {
    let tree = parse_tree(text)?;
    let mut fields = Fields::new("", &tree)?;
    fields.req_string("kind")
}

// ---------------------------------------------------------------------------
// Serialization: typed descriptors -> grammar tree -> text
// ---------------------------------------------------------------------------

fn scalar(text: &str) -> Value {
    Value::Scalar(Scalar::Str(text.to_string()))
}

fn int(n: u64) -> Value {
    Value::Scalar(Scalar::Int(n))
}

fn params_value(params: &[(String, String)]) -> Value {
    Value::Map(params.iter().map(|(k, v)| (k.clone(), scalar(v))).collect())
}

impl Vnfd {
    pub fn to_value(&self) -> Value {
        let mut entries = vec![
            ("kind".to_string(), scalar("vnfd")),
            ("id".to_string(), scalar(&self.id)),
            ("mgmt-network".to_string(), scalar(&self.mgmt_network)),
        ];
        let vdus = self
            .vdus
            .iter()
            .map(|vdu| {
                Value::Map(vec![
                    ("id".to_string(), scalar(&vdu.id)),
                    ("image".to_string(), scalar(&vdu.image)),
                    ("vcpus".to_string(), int(vdu.flavor.vcpus)),
                    ("memory-mb".to_string(), int(vdu.flavor.memory_mb)),
                    ("storage-gb".to_string(), int(vdu.flavor.storage_gb)),
                    (
                        "interfaces".to_string(),
                        Value::List(
                            vdu.interfaces
                                .iter()
                                .map(|i| {
                                    Value::Map(vec![
                                        ("name".to_string(), scalar(&i.name)),
                                        ("network".to_string(), scalar(&i.network)),
                                    ])
                                })
                                .collect(),
                        ),
                    ),
                ])
            })
            .collect();
        entries.push(("vdus".to_string(), Value::List(vdus)));
        if !self.internal_vls.is_empty() {
            entries.push((
                "internal-vls".to_string(),
                Value::List(self.internal_vls.iter().map(|v| scalar(v)).collect()),
            ));
        }
        if !self.metrics.is_empty() {
            entries.push((
                "metrics".to_string(),
                Value::List(
                    self.metrics
                        .iter()
                        .map(|m| {
                            Value::Map(vec![
                                ("name".to_string(), scalar(m.name.as_str())),
                                ("vdu".to_string(), scalar(&m.target_vdu)),
                                ("period-s".to_string(), int(m.collection_period_s)),
                            ])
                        })
                        .collect(),
                ),
            ));
        }
        for (key, params) in [("day0", &self.day0), ("day1", &self.day1), ("day2", &self.day2)] {
            if !params.is_empty() {
                entries.push((key.to_string(), params_value(params)));
            }
        }
        Value::Map(entries)
    }

    pub fn to_document(&self) -> String {
        grammar::serialize_document(&self.to_value())
    }
}

impl Nsd {
    pub fn to_value(&self) -> Value {
        let mut entries = vec![
            ("kind".to_string(), scalar("nsd")),
            ("id".to_string(), scalar(&self.id)),
            (
                "vnfds".to_string(),
                Value::List(self.vnfds.iter().map(|v| scalar(v)).collect()),
            ),
        ];
        if !self.cps.is_empty() {
            entries.push((
                "cps".to_string(),
                Value::List(
                    self.cps
                        .iter()
                        .map(|cp| {
                            Value::Map(vec![
                                ("name".to_string(), scalar(&cp.name)),
                                ("vnfd".to_string(), scalar(&cp.vnfd)),
                                ("interface".to_string(), scalar(&cp.interface)),
                            ])
                        })
                        .collect(),
                ),
            ));
        }
        Value::Map(entries)
    }

    pub fn to_document(&self) -> String {
        grammar::serialize_document(&self.to_value())
    }
}

impl Nsid {
    pub fn to_value(&self) -> Value {
        let mut entries = vec![
            ("kind".to_string(), scalar("nsid")),
            ("id".to_string(), scalar(&self.id)),
            (
                "segments".to_string(),
                Value::List(
                    self.segments
                        .iter()
                        .map(|seg| {
                            let mut fields = vec![("nsd".to_string(), scalar(&seg.nsd))];
                            if let Some(vim) = &seg.vim {
                                fields.push(("vim".to_string(), scalar(vim)));
                            }
                            Value::Map(fields)
                        })
                        .collect(),
                ),
            ),
        ];
        if !self.chain.is_empty() {
            entries.push((
                "chain".to_string(),
                Value::List(
                    self.chain
                        .iter()
                        .map(|link| {
                            Value::Map(vec![
                                ("from".to_string(), scalar(&link.from.to_string())),
                                ("to".to_string(), scalar(&link.to.to_string())),
                            ])
                        })
                        .collect(),
                ),
            ));
        }
        Value::Map(entries)
    }

    pub fn to_document(&self) -> String {
        grammar::serialize_document(&self.to_value())
    }
}

impl DescriptorPackage {
    /// Builds a package from already-parsed pieces.
    pub fn new(vnfds: Vec<Vnfd>, nsds: Vec<Nsd>, nsid: Nsid) -> DescriptorPackage {
        DescriptorPackage { vnfds, nsds, nsid }
    }

    /// Parses a set of documents (any order) into one package. The set must
    /// contain exactly one NSID document.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Result<DescriptorPackage, ParseError> {
        let mut vnfds = Vec::new();
        let mut nsds = Vec::new();
        let mut nsids = Vec::new();
        for text in texts {
            let tree = parse_tree(text.as_ref())?;
            let mut fields = Fields::new("", &tree)?;
            let kind = fields.req_string("kind")?;
            match kind.as_str() {
                "vnfd" => vnfds.push(parse_vnfd_value(&tree)?),
                "nsd" => nsds.push(parse_nsd_value(&tree)?),
                "nsid" => nsids.push(parse_nsid_value(&tree)?),
                other => return Err(syntax(format!("unsupported document kind `{other}`"))),
            }
        }
        match nsids.len() {
            0 => Err(syntax("package contains no nsid document")),
            1 => Ok(DescriptorPackage {
                vnfds,
                nsds,
                nsid: nsids.pop().expect("one nsid"),
            }),
            n => Err(syntax(format!(
                "package contains {n} nsid documents, expected exactly one"
            ))),
        }
    }

    pub fn vnfd(&self, id: &str) -> Option<&Vnfd> {
        self.vnfds.iter().find(|v| v.id == id)
    }

    pub fn nsd(&self, id: &str) -> Option<&Nsd> {
        self.nsds.iter().find(|n| n.id == id)
    }

    /// Canonical textual form: every document re-serialized in package order,
    /// separated by `---` lines. Equal packages yield equal bytes.
    pub fn canonical_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        parts.extend(self.vnfds.iter().map(Vnfd::to_document));
        parts.extend(self.nsds.iter().map(Nsd::to_document));
        parts.push(self.nsid.to_document());
        parts.join("---\n")
    }
}

// ---------------------------------------------------------------------------
// Cross-level validation
// ---------------------------------------------------------------------------

/// Descriptor level a finding belongs to; orders findings in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Vnfd,
    Nsd,
    Nsid,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::Vnfd => f.write_str("vnfd"),
            Level::Nsd => f.write_str("nsd"),
            Level::Nsid => f.write_str("nsid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub level: Level,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn to_lines(&self) -> Vec<String> {
        self.findings
            .iter()
            .map(|f| format!("{} {}: {}", f.level, f.id, f.message))
            .collect()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.findings.is_empty() {
            return f.write_str("clean");
        }
        f.write_str(&self.to_lines().join("; "))
    }
}

/// Cross-level referential integrity over individually well-formed inputs.
/// Findings are data, not failures; the report is deterministic and sorted
/// by (level, id, message).
pub fn validate_package(vnfds: &[Vnfd], nsds: &[Nsd], nsid: &Nsid) -> ValidationReport {
    let mut findings = Vec::new();

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for vnfd in vnfds {
        if !seen.insert(&vnfd.id) {
            findings.push(Finding {
                level: Level::Vnfd,
                id: vnfd.id.clone(),
                message: "duplicate vnfd id".to_string(),
            });
        }
        for key in &vnfd.unknown_keys {
            findings.push(Finding {
                level: Level::Vnfd,
                id: vnfd.id.clone(),
                message: format!("unknown key `{key}`"),
            });
        }
    }

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for nsd in nsds {
        if !seen.insert(&nsd.id) {
            findings.push(Finding {
                level: Level::Nsd,
                id: nsd.id.clone(),
                message: "duplicate nsd id".to_string(),
            });
        }
        for key in &nsd.unknown_keys {
            findings.push(Finding {
                level: Level::Nsd,
                id: nsd.id.clone(),
                message: format!("unknown key `{key}`"),
            });
        }
        for constituent in &nsd.vnfds {
            if !vnfds.iter().any(|v| &v.id == constituent) {
                findings.push(Finding {
                    level: Level::Nsd,
                    id: nsd.id.clone(),
                    message: format!("constituent vnfd `{constituent}` not found in package"),
                });
            }
        }
        for cp in &nsd.cps {
            let Some(vnfd) = vnfds.iter().find(|v| v.id == cp.vnfd) else {
                // The owning vnfd is missing; the constituent finding above
                // already covers it.
                continue;
            };
            let owners = vnfd.interface_owners(&cp.interface);
            match owners.len() {
                1 => {}
                0 => findings.push(Finding {
                    level: Level::Nsd,
                    id: nsd.id.clone(),
                    message: format!(
                        "cp `{}`: interface `{}` not found in vnfd `{}`",
                        cp.name, cp.interface, cp.vnfd
                    ),
                }),
                _ => findings.push(Finding {
                    level: Level::Nsd,
                    id: nsd.id.clone(),
                    message: format!(
                        "cp `{}`: interface `{}` is declared by multiple vdus of vnfd `{}`",
                        cp.name, cp.interface, cp.vnfd
                    ),
                }),
            }
        }
    }

    for key in &nsid.unknown_keys {
        findings.push(Finding {
            level: Level::Nsid,
            id: nsid.id.clone(),
            message: format!("unknown key `{key}`"),
        });
    }
    for (idx, segment) in nsid.segments.iter().enumerate() {
        if !nsds.iter().any(|n| n.id == segment.nsd) {
            findings.push(Finding {
                level: Level::Nsid,
                id: nsid.id.clone(),
                message: format!("segment {idx}: nsd `{}` not found in package", segment.nsd),
            });
        }
    }
    for link in &nsid.chain {
        for ep in [&link.from, &link.to] {
            let Some(segment) = nsid.segments.get(ep.segment) else {
                continue; // out-of-range is a parse invariant
            };
            let Some(nsd) = nsds.iter().find(|n| n.id == segment.nsd) else {
                continue; // unresolved segment already reported
            };
            if !nsd.cps.iter().any(|cp| cp.name == ep.cp) {
                findings.push(Finding {
                    level: Level::Nsid,
                    id: nsid.id.clone(),
                    message: format!("chain endpoint `{ep}`: cp `{}` not declared by nsd `{}`", ep.cp, nsd.id),
                });
            }
        }
    }

    findings.sort();
    ValidationReport { findings }
}

// ---------------------------------------------------------------------------
// Resource budget
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BudgetError {
    #[error("segment {index} (`{nsd}`) has no vim affinity and no default vim is configured")]
    NoAffinity { index: usize, nsd: String },
}

/// Sums the flavors of every VDU the NSID would instantiate, grouped by the
/// VIM each segment is affined to. Segments without an affinity fall back to
/// `default_vim`.
pub fn resource_budget(
    package: &DescriptorPackage,
    default_vim: Option<&str>,
) -> Result<BTreeMap<String, ResourceVector>, BudgetError> {
    let mut totals: BTreeMap<String, ResourceVector> = BTreeMap::new();
    for (index, segment) in package.nsid.segments.iter().enumerate() {
        let vim = match (&segment.vim, default_vim) {
            (Some(vim), _) => vim.clone(),
            (None, Some(default)) => default.to_string(),
            (None, None) => {
                return Err(BudgetError::NoAffinity {
                    index,
                    nsd: segment.nsd.clone(),
                })
            }
        };
        let entry = totals.entry(vim).or_default();
        if let Some(nsd) = package.nsd(&segment.nsd) {
            for vnfd_id in &nsd.vnfds {
                if let Some(vnfd) = package.vnfd(vnfd_id) {
                    for vdu in &vnfd.vdus {
                        entry.add(&vdu.flavor);
                    }
                }
            }
        }
    }
    Ok(totals)
}

/// Budget of a single segment (used by placement planning).
pub fn segment_budget(package: &DescriptorPackage, segment: &SegmentDef) -> ResourceVector {
    let mut total = ResourceVector::default();
    if let Some(nsd) = package.nsd(&segment.nsd) {
        for vnfd_id in &nsd.vnfds {
            if let Some(vnfd) = package.vnfd(vnfd_id) {
                for vdu in &vnfd.vdus {
                    total.add(&vdu.flavor);
                }
            }
        }
    }
    total
}
