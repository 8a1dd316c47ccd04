//! Combined NFVO/VNFM: package onboarding, placement planning, network
//! service instantiation, slice chaining across VIMs and lifecycle
//! management.
//!
//! Slice instantiation runs in three strictly ordered phases - VMs first,
//! then service instances, then chain edges - and any failure rolls back
//! every VM already allocated, on every touched VIM. Commands are processed
//! one at a time through a single `&mut` owner; queries read snapshots.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{segment_budget, validate_package, DescriptorPackage, Nsd, ResourceVector, ValidationReport};
use crate::fabric::{Fabric, FabricError};
use crate::nfvi::{NfviError, VimSet, VmRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LifecycleState {
    Onboarded,
    Instantiating,
    Day0Done,
    Day1Configured,
    Running,
    Terminating,
    Terminated,
    Failed,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 8] = [
        LifecycleState::Onboarded,
        LifecycleState::Instantiating,
        LifecycleState::Day0Done,
        LifecycleState::Day1Configured,
        LifecycleState::Running,
        LifecycleState::Terminating,
        LifecycleState::Terminated,
        LifecycleState::Failed,
    ];

    pub fn is_terminal(&self) -> bool {
        matches!(self, LifecycleState::Terminated | LifecycleState::Failed)
    }

    /// The legal transition relation: the forward chain, early termination
    /// from any instantiated-but-not-yet-running state, and failure from any
    /// non-terminal state.
    pub fn can_transition(from: LifecycleState, to: LifecycleState) -> bool {
        use LifecycleState::*;
        matches!(
            (from, to),
            (Onboarded, Instantiating)
                | (Instantiating, Day0Done)
                | (Day0Done, Day1Configured)
                | (Day1Configured, Running)
                | (Running, Terminating)
                | (Day0Done, Terminating)
                | (Day1Configured, Terminating)
                | (Terminating, Terminated)
        ) || (to == Failed && !from.is_terminal())
    }
}

impl std::fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LifecycleState::Onboarded => "Onboarded",
            LifecycleState::Instantiating => "Instantiating",
            LifecycleState::Day0Done => "Day0Done",
            LifecycleState::Day1Configured => "Day1Configured",
            LifecycleState::Running => "Running",
            LifecycleState::Terminating => "Terminating",
            LifecycleState::Terminated => "Terminated",
            LifecycleState::Failed => "Failed",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackageId(pub String);

impl std::fmt::Display for PackageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in bytes {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl PackageId {
    /// Content-derived id: equal package content yields an equal id, which
    /// is what makes onboarding idempotent.
    pub fn of(package: &DescriptorPackage) -> PackageId {
        PackageId(format!("pkg-{:016x}", fnv1a64(package.canonical_text().as_bytes())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    VimCreated,
    PackageOnboarded,
    Transition,
    VmAllocated,
    VmReleased,
    NsCreated,
    NsReleased,
    ChainLinked,
    ChainRetracted,
    ConfigDay1,
    ConfigDay2,
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EventKind::VimCreated => "vim-created",
            EventKind::PackageOnboarded => "package-onboarded",
            EventKind::Transition => "transition",
            EventKind::VmAllocated => "vm-allocated",
            EventKind::VmReleased => "vm-released",
            EventKind::NsCreated => "ns-created",
            EventKind::NsReleased => "ns-released",
            EventKind::ChainLinked => "chain-linked",
            EventKind::ChainRetracted => "chain-retracted",
            EventKind::ConfigDay1 => "config-day1",
            EventKind::ConfigDay2 => "config-day2",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub ts: u64,
    /// Owning slice, or `-` for engine-scope events.
    pub slice_id: String,
    pub kind: EventKind,
    pub detail: String,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        format!("{} {} {} {}", self.ts, self.slice_id, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCp {
    pub name: String,
    pub vm_id: String,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsInstance {
    pub ns_id: String,
    pub nsd_id: String,
    pub vim_id: String,
    pub vm_ids: Vec<String>,
    pub cps: Vec<ResolvedCp>,
    pub state: LifecycleState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceInstance {
    pub slice_id: String,
    pub nsid_id: String,
    pub package_id: PackageId,
    /// NS instance ids, ordered like the NSID segments.
    pub ns_ids: Vec<String>,
    pub chain_edges: Vec<(String, String)>,
    /// MVNO path holding this slice, when bound by the tenancy layer.
    pub tenant_ref: Option<String>,
    pub state: LifecycleState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementAssignment {
    pub segment: usize,
    pub nsd_id: String,
    pub vim_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub assignments: Vec<PlacementAssignment>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OrchestratorError {
    #[error("package validation failed: {0}")]
    ValidationFailed(ValidationReport),
    #[error("nsd `{0}` is not onboarded")]
    UnknownNsd(String),
    #[error("nsid `{0}` is not onboarded")]
    UnknownNsid(String),
    #[error("slice `{0}` not found")]
    UnknownSlice(String),
    #[error("vnfd `{0}` is not part of this slice")]
    UnknownVnfd(String),
    #[error("no feasible placement: segment {segment} (`{nsd}`): {detail}")]
    NoFeasiblePlacement {
        segment: usize,
        nsd: String,
        detail: String,
    },
    #[error("placement plan does not cover segment {segment} (`{nsd}`)")]
    PlanIncomplete { segment: usize, nsd: String },
    #[error("chain resolution failed: {0}")]
    ChainError(String),
    #[error("slice `{slice}` is {state}, expected {expected}")]
    InvalidState {
        slice: String,
        state: LifecycleState,
        expected: String,
    },
    #[error("slice `{slice}` is attached to tenant `{tenant}`; detach it first")]
    TenantAttached { slice: String, tenant: String },
    #[error(transparent)]
    Nfvi(#[from] NfviError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Orchestrator {
    packages: Vec<(PackageId, DescriptorPackage)>,
    ns_instances: Vec<NsInstance>,
    slices: Vec<SliceInstance>,
    ns_seq: u64,
    slice_seq: u64,
    events: Vec<EventRecord>,
}

impl Orchestrator {
    pub fn new() -> Orchestrator {
        Orchestrator::default()
    }

    pub fn log_event(&mut self, ts: u64, slice_id: Option<&str>, kind: EventKind, detail: String) {
        self.events.push(EventRecord {
            ts,
            slice_id: slice_id.unwrap_or("-").to_string(),
            kind,
            detail,
        });
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn event_lines(&self) -> Vec<String> {
        self.events.iter().map(EventRecord::to_line).collect()
    }

    // -- catalog ------------------------------------------------------------

    pub fn onboard_package(&mut self, package: DescriptorPackage, ts: u64) -> Result<PackageId, OrchestratorError> {
        let report = validate_package(&package.vnfds, &package.nsds, &package.nsid);
        if !report.is_clean() {
            return Err(OrchestratorError::ValidationFailed(report));
        }
        let id = PackageId::of(&package);
        if self.packages.iter().any(|(existing, _)| existing == &id) {
            return Ok(id);
        }
        self.log_event(
            ts,
            None,
            EventKind::PackageOnboarded,
            format!("{id} nsid {}", package.nsid.id),
        );
        self.packages.push((id.clone(), package));
        Ok(id)
    }

    pub fn package(&self, id: &PackageId) -> Option<&DescriptorPackage> {
        self.packages.iter().find(|(pid, _)| pid == id).map(|(_, p)| p)
    }

    pub fn packages(&self) -> &[(PackageId, DescriptorPackage)] {
        &self.packages
    }

    /// Most recent package defining the NSD (later onboards shadow earlier ones).
    fn package_for_nsd(&self, nsd_id: &str) -> Option<(&PackageId, &DescriptorPackage)> {
        self.packages
            .iter()
            .rev()
            .find(|(_, p)| p.nsd(nsd_id).is_some())
            .map(|(id, p)| (id, p))
    }

    fn package_for_nsid(&self, nsid_id: &str) -> Option<(&PackageId, &DescriptorPackage)> {
        self.packages
            .iter()
            .rev()
            .find(|(_, p)| p.nsid.id == nsid_id)
            .map(|(id, p)| (id, p))
    }

    // -- placement ----------------------------------------------------------

    /// Plans VIM assignment per segment: explicit affinities (or caller
    /// overrides, keyed by NSD id) win; everything else is first-fit over the
    /// VIMs in registration order against remaining capacity, accounting for
    /// what this plan already reserves.
    pub fn plan_placement(
        &self,
        nsid_id: &str,
        vims: &VimSet,
        overrides: &BTreeMap<String, String>,
    ) -> Result<PlacementPlan, OrchestratorError> {
        let (_, package) = self
            .package_for_nsid(nsid_id)
            .ok_or_else(|| OrchestratorError::UnknownNsid(nsid_id.to_string()))?;
        let mut planned: BTreeMap<String, ResourceVector> = BTreeMap::new();
        let mut assignments = Vec::new();
        for (segment, def) in package.nsid.segments.iter().enumerate() {
            let budget = segment_budget(package, def);
            let affinity = overrides.get(&def.nsd).cloned().or_else(|| def.vim.clone());
            let vim_id = match affinity {
                Some(vim_id) => {
                    if vims.get(&vim_id).is_err() {
                        return Err(OrchestratorError::NoFeasiblePlacement {
                            segment,
                            nsd: def.nsd.clone(),
                            detail: format!("affinity vim `{vim_id}` is not registered"),
                        });
                    }
                    vim_id
                }
                None => {
                    let mut fit = None;
                    for vim in vims.iter() {
                        let mut free = vim.free();
                        if let Some(reserved) = planned.get(vim.name()) {
                            free.vcpus -= reserved.vcpus.min(free.vcpus);
                            free.memory_mb -= reserved.memory_mb.min(free.memory_mb);
                            free.storage_gb -= reserved.storage_gb.min(free.storage_gb);
                        }
                        if budget.fits_within(&free) {
                            fit = Some(vim.name().to_string());
                            break;
                        }
                    }
                    fit.ok_or_else(|| OrchestratorError::NoFeasiblePlacement {
                        segment,
                        nsd: def.nsd.clone(),
                        detail: format!(
                            "needs {} vcpus, {} MB, {} GB but no registered vim has that free",
                            budget.vcpus, budget.memory_mb, budget.storage_gb
                        ),
                    })?
                }
            };
            let entry = planned.entry(vim_id.clone()).or_default();
            entry.vcpus += budget.vcpus;
            entry.memory_mb += budget.memory_mb;
            entry.storage_gb += budget.storage_gb;
            assignments.push(PlacementAssignment {
                segment,
                nsd_id: def.nsd.clone(),
                vim_id,
            });
        }
        Ok(PlacementPlan { assignments })
    }

    // -- instantiation ------------------------------------------------------

    /// Allocates one VM per VDU of every constituent VNFD, in descriptor
    /// order. On failure every VM of this call is released again before the
    /// error propagates.
    fn allocate_segment_vms(
        &mut self,
        vims: &mut VimSet,
        package: &DescriptorPackage,
        nsd: &Nsd,
        vim_id: &str,
        slice_ref: Option<&str>,
        ts: u64,
    ) -> Result<Vec<VmRecord>, OrchestratorError> {
        vims.get(vim_id)?;
        let mut allocated: Vec<VmRecord> = Vec::new();
        for vnfd_id in &nsd.vnfds {
            let vnfd = package
                .vnfd(vnfd_id)
                .ok_or_else(|| OrchestratorError::ChainError(format!("vnfd `{vnfd_id}` missing from package")))?;
            for vdu in &vnfd.vdus {
                let vim = vims.get_mut(vim_id)?;
                match vim.allocate_vdu(vdu, vnfd_id, slice_ref, ts) {
                    Ok(vm) => {
                        self.log_event(
                            ts,
                            slice_ref,
                            EventKind::VmAllocated,
                            format!("{} {} {}", vm.vm_id, vdu.id, vnfd_id),
                        );
                        allocated.push(vm);
                    }
                    Err(err) => {
                        self.release_vms(vims, &allocated, slice_ref, ts);
                        return Err(err.into());
                    }
                }
            }
        }
        Ok(allocated)
    }

    /// Releases VMs in reverse allocation order, logging each release.
    fn release_vms(&mut self, vims: &mut VimSet, vms: &[VmRecord], slice_ref: Option<&str>, ts: u64) {
        for vm in vms.iter().rev() {
            let vim_name = vm.vm_id.split('/').next().unwrap_or_default().to_string();
            if let Ok(vim) = vims.get_mut(&vim_name) {
                if vim.release_vm(&vm.vm_id, ts).is_ok() {
                    self.log_event(ts, slice_ref, EventKind::VmReleased, vm.vm_id.clone());
                }
            }
        }
    }

    fn resolve_cps(
        nsd: &Nsd,
        package: &DescriptorPackage,
        vms: &[VmRecord],
    ) -> Result<Vec<ResolvedCp>, OrchestratorError> {
        let mut cps = Vec::new();
        for cp in &nsd.cps {
            let vnfd = package.vnfd(&cp.vnfd).ok_or_else(|| {
                OrchestratorError::ChainError(format!("cp `{}`: vnfd `{}` missing", cp.name, cp.vnfd))
            })?;
            let owners = vnfd.interface_owners(&cp.interface);
            let [vdu_id] = owners.as_slice() else {
                return Err(OrchestratorError::ChainError(format!(
                    "cp `{}`: interface `{}` resolves to {} vdus of `{}`",
                    cp.name,
                    cp.interface,
                    owners.len(),
                    cp.vnfd
                )));
            };
            let vm = vms
                .iter()
                .find(|vm| vm.vnfd_id == cp.vnfd && &vm.vdu_id == vdu_id)
                .ok_or_else(|| OrchestratorError::ChainError(format!("cp `{}`: no vm for vdu `{vdu_id}`", cp.name)))?;
            cps.push(ResolvedCp {
                name: cp.name.clone(),
                vm_id: vm.vm_id.clone(),
                interface: cp.interface.clone(),
            });
        }
        Ok(cps)
    }

    fn next_ns_id(&mut self) -> String {
        self.ns_seq += 1;
        format!("ns-{}", self.ns_seq)
    }

    /// Instantiates one network service on one VIM, outside any slice.
    pub fn instantiate_ns(
        &mut self,
        vims: &mut VimSet,
        nsd_id: &str,
        vim_id: &str,
        ts: u64,
    ) -> Result<String, OrchestratorError> {
        let (_, package) = self
            .package_for_nsd(nsd_id)
            .ok_or_else(|| OrchestratorError::UnknownNsd(nsd_id.to_string()))?;
        let package = package.clone();
        let nsd = package.nsd(nsd_id).expect("package_for_nsd").clone();
        let vms = self.allocate_segment_vms(vims, &package, &nsd, vim_id, None, ts)?;
        let cps = match Self::resolve_cps(&nsd, &package, &vms) {
            Ok(cps) => cps,
            Err(err) => {
                self.release_vms(vims, &vms, None, ts);
                return Err(err);
            }
        };
        let ns_id = self.next_ns_id();
        self.log_event(ts, None, EventKind::NsCreated, format!("{ns_id} {nsd_id} {vim_id}"));
        self.ns_instances.push(NsInstance {
            ns_id: ns_id.clone(),
            nsd_id: nsd_id.to_string(),
            vim_id: vim_id.to_string(),
            vm_ids: vms.iter().map(|vm| vm.vm_id.clone()).collect(),
            cps,
            state: LifecycleState::Day0Done,
        });
        Ok(ns_id)
    }

    fn transition(&mut self, slice_idx: usize, to: LifecycleState, ts: u64) {
        let slice = &mut self.slices[slice_idx];
        let from = slice.state;
        debug_assert!(
            LifecycleState::can_transition(from, to),
            "illegal transition {from} -> {to}"
        );
        slice.state = to;
        let slice_id = slice.slice_id.clone();
        self.log_event(ts, Some(&slice_id), EventKind::Transition, format!("{from}->{to}"));
    }

    /// Builds the slice connectivity graph: one clique per internal vl over
    /// the VMs hosting its member interfaces, plus the resolved chain edges.
    fn graph_parts(
        package: &DescriptorPackage,
        segment_vms: &[Vec<VmRecord>],
        chain_edges: &[(String, String)],
    ) -> (Vec<String>, Vec<(String, String)>) {
        let mut nodes = Vec::new();
        let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
        for vms in segment_vms {
            for vm in vms {
                nodes.push(vm.vm_id.clone());
            }
            for vm in vms {
                let Some(vnfd) = package.vnfd(&vm.vnfd_id) else {
                    continue;
                };
                for vl in &vnfd.internal_vls {
                    let member_vdus: BTreeSet<&str> = vnfd.vl_members(vl).into_iter().map(|(vdu, _)| vdu).collect();
                    let member_vms: Vec<&str> = vms
                        .iter()
                        .filter(|m| m.vnfd_id == vm.vnfd_id && member_vdus.contains(m.vdu_id.as_str()))
                        .map(|m| m.vm_id.as_str())
                        .collect();
                    for (i, a) in member_vms.iter().enumerate() {
                        for b in member_vms.iter().skip(i + 1) {
                            let (x, y) = if a <= b { (a, b) } else { (b, a) };
                            edges.insert((x.to_string(), y.to_string()));
                        }
                    }
                }
            }
        }
        let mut edges: Vec<(String, String)> = edges.into_iter().collect();
        edges.extend(chain_edges.iter().cloned());
        (nodes, edges)
    }

    /// Instantiates an end-to-end slice: phase 1 allocates every VM, phase 2
    /// registers the service instances, phase 3 resolves chain edges and
    /// registers the graph with the fabric. A failure in any phase releases
    /// everything and leaves the slice record in Failed state.
    pub fn instantiate_slice(
        &mut self,
        vims: &mut VimSet,
        fabric: &mut Fabric,
        nsid_id: &str,
        plan: &PlacementPlan,
        ts: u64,
    ) -> Result<String, OrchestratorError> {
        let (package_id, package) = self
            .package_for_nsid(nsid_id)
            .ok_or_else(|| OrchestratorError::UnknownNsid(nsid_id.to_string()))?;
        let package_id = package_id.clone();
        let package = package.clone();

        self.slice_seq += 1;
        let slice_id = format!("slice-{}", self.slice_seq);
        self.slices.push(SliceInstance {
            slice_id: slice_id.clone(),
            nsid_id: nsid_id.to_string(),
            package_id,
            ns_ids: Vec::new(),
            chain_edges: Vec::new(),
            tenant_ref: None,
            state: LifecycleState::Onboarded,
        });
        let slice_idx = self.slices.len() - 1;
        self.transition(slice_idx, LifecycleState::Instantiating, ts);

        let fail =
            |orch: &mut Self, vims: &mut VimSet, allocated: &[Vec<VmRecord>], ts: u64, err: OrchestratorError| {
                let flat: Vec<VmRecord> = allocated.iter().flatten().cloned().collect();
                orch.release_vms(vims, &flat, Some(&orch.slices[slice_idx].slice_id.clone()), ts);
                orch.transition(slice_idx, LifecycleState::Failed, ts);
                Err(err)
            };

        // The plan may list assignments in any order; resolve one VIM per
        // segment index before touching anything.
        let mut segment_vims: Vec<String> = Vec::new();
        for (segment, def) in package.nsid.segments.iter().enumerate() {
            match plan.assignments.iter().find(|a| a.segment == segment) {
                Some(assignment) => segment_vims.push(assignment.vim_id.clone()),
                None => {
                    let err = OrchestratorError::PlanIncomplete {
                        segment,
                        nsd: def.nsd.clone(),
                    };
                    return fail(self, vims, &[], ts, err);
                }
            }
        }

        // Phase 1: allocate every VDU of every segment.
        let mut segment_vms: Vec<Vec<VmRecord>> = Vec::new();
        for (segment, def) in package.nsid.segments.iter().enumerate() {
            let nsd = match package.nsd(&def.nsd) {
                Some(nsd) => nsd.clone(),
                None => {
                    let err = OrchestratorError::UnknownNsd(def.nsd.clone());
                    return fail(self, vims, &segment_vms, ts, err);
                }
            };
            match self.allocate_segment_vms(vims, &package, &nsd, &segment_vims[segment], Some(&slice_id), ts) {
                Ok(vms) => segment_vms.push(vms),
                Err(err) => return fail(self, vims, &segment_vms, ts, err),
            }
        }

        // Phase 2: create one service instance per segment.
        let mut ns_ids = Vec::new();
        let mut ns_records = Vec::new();
        for (segment, def) in package.nsid.segments.iter().enumerate() {
            let nsd = package.nsd(&def.nsd).expect("checked in phase 1");
            let vims_of_segment = &segment_vms[segment];
            let cps = match Self::resolve_cps(nsd, &package, vims_of_segment) {
                Ok(cps) => cps,
                Err(err) => return fail(self, vims, &segment_vms, ts, err),
            };
            let ns_id = self.next_ns_id();
            let vim_id = segment_vims[segment].clone();
            self.log_event(
                ts,
                Some(&slice_id),
                EventKind::NsCreated,
                format!("{ns_id} {} {vim_id}", def.nsd),
            );
            ns_records.push(NsInstance {
                ns_id: ns_id.clone(),
                nsd_id: def.nsd.clone(),
                vim_id,
                vm_ids: vims_of_segment.iter().map(|vm| vm.vm_id.clone()).collect(),
                cps,
                state: LifecycleState::Day0Done,
            });
            ns_ids.push(ns_id);
        }

        // Phase 3: resolve chain endpoints and register with the fabric.
        let mut chain_edges = Vec::new();
        for link in &package.nsid.chain {
            let resolve = |seg: usize, cp_name: &str| -> Result<String, OrchestratorError> {
                ns_records[seg]
                    .cps
                    .iter()
                    .find(|cp| cp.name == cp_name)
                    .map(|cp| cp.vm_id.clone())
                    .ok_or_else(|| {
                        OrchestratorError::ChainError(format!(
                            "endpoint `{seg}.{cp_name}` has no resolved cp on segment {seg}"
                        ))
                    })
            };
            let from = match resolve(link.from.segment, &link.from.cp) {
                Ok(vm) => vm,
                Err(err) => return fail(self, vims, &segment_vms, ts, err),
            };
            let to = match resolve(link.to.segment, &link.to.cp) {
                Ok(vm) => vm,
                Err(err) => return fail(self, vims, &segment_vms, ts, err),
            };
            chain_edges.push((from, to));
        }
        let (nodes, edges) = Self::graph_parts(&package, &segment_vms, &chain_edges);
        if let Err(err) = fabric.register_slice(&slice_id, nodes, edges) {
            return fail(self, vims, &segment_vms, ts, err.into());
        }
        for (from, to) in &chain_edges {
            self.log_event(ts, Some(&slice_id), EventKind::ChainLinked, format!("{from} {to}"));
        }

        self.ns_instances.extend(ns_records);
        self.slices[slice_idx].ns_ids = ns_ids;
        self.slices[slice_idx].chain_edges = chain_edges;
        self.transition(slice_idx, LifecycleState::Day0Done, ts);
        Ok(slice_id)
    }

    // -- lifecycle ----------------------------------------------------------

    fn slice_index(&self, slice_id: &str) -> Result<usize, OrchestratorError> {
        self.slices
            .iter()
            .position(|s| s.slice_id == slice_id)
            .ok_or_else(|| OrchestratorError::UnknownSlice(slice_id.to_string()))
    }

    pub fn slice(&self, slice_id: &str) -> Option<&SliceInstance> {
        self.slices.iter().find(|s| s.slice_id == slice_id)
    }

    pub fn slices(&self) -> &[SliceInstance] {
        &self.slices
    }

    pub fn ns_instance(&self, ns_id: &str) -> Option<&NsInstance> {
        self.ns_instances.iter().find(|n| n.ns_id == ns_id)
    }

    pub fn ns_instances(&self) -> &[NsInstance] {
        &self.ns_instances
    }

    /// VM ids of a slice, in segment order.
    pub fn slice_vm_ids(&self, slice_id: &str) -> Vec<String> {
        let Some(slice) = self.slice(slice_id) else {
            return Vec::new();
        };
        slice
            .ns_ids
            .iter()
            .filter_map(|ns_id| self.ns_instance(ns_id))
            .flat_map(|ns| ns.vm_ids.iter().cloned())
            .collect()
    }

    fn set_ns_states(&mut self, slice_idx: usize, state: LifecycleState) {
        let ns_ids = self.slices[slice_idx].ns_ids.clone();
        for ns in &mut self.ns_instances {
            if ns_ids.contains(&ns.ns_id) {
                ns.state = state;
            }
        }
    }

    /// Applies each VNFD's day-1 parameter map to its VMs, then moves the
    /// slice to Running. Returns the number of config events recorded.
    pub fn day1_configure(&mut self, vims: &VimSet, slice_id: &str, ts: u64) -> Result<usize, OrchestratorError> {
        let slice_idx = self.slice_index(slice_id)?;
        let slice = &self.slices[slice_idx];
        if slice.state != LifecycleState::Day0Done {
            return Err(OrchestratorError::InvalidState {
                slice: slice_id.to_string(),
                state: slice.state,
                expected: "Day0Done".to_string(),
            });
        }
        let package = self.package(&slice.package_id).expect("onboarded package").clone();
        let mut configured = 0;
        for vm_id in self.slice_vm_ids(slice_id) {
            let Some((_, vm)) = vims.find_vm(&vm_id) else { continue };
            let Some(vnfd) = package.vnfd(&vm.vnfd_id) else {
                continue;
            };
            if vnfd.day1.is_empty() {
                continue;
            }
            let params = vnfd
                .day1
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",");
            self.log_event(ts, Some(slice_id), EventKind::ConfigDay1, format!("{vm_id} {params}"));
            configured += 1;
        }
        self.transition(slice_idx, LifecycleState::Day1Configured, ts);
        self.transition(slice_idx, LifecycleState::Running, ts);
        self.set_ns_states(slice_idx, LifecycleState::Running);
        Ok(configured)
    }

    /// Appends a reconfiguration event for one VNFD of a running slice.
    pub fn day2_reconfigure(
        &mut self,
        slice_id: &str,
        vnfd_id: &str,
        params: &[(String, String)],
        ts: u64,
    ) -> Result<(), OrchestratorError> {
        let slice_idx = self.slice_index(slice_id)?;
        let slice = &self.slices[slice_idx];
        if slice.state != LifecycleState::Running {
            return Err(OrchestratorError::InvalidState {
                slice: slice_id.to_string(),
                state: slice.state,
                expected: "Running".to_string(),
            });
        }
        let package = self.package(&slice.package_id).expect("onboarded package");
        let in_slice = slice.ns_ids.iter().any(|ns_id| {
            self.ns_instance(ns_id)
                .and_then(|ns| package.nsd(&ns.nsd_id))
                .is_some_and(|nsd| nsd.vnfds.iter().any(|v| v == vnfd_id))
        });
        if !in_slice {
            return Err(OrchestratorError::UnknownVnfd(vnfd_id.to_string()));
        }
        let detail = if params.is_empty() {
            vnfd_id.to_string()
        } else {
            format!(
                "{vnfd_id} {}",
                params
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(",")
            )
        };
        self.log_event(ts, Some(slice_id), EventKind::ConfigDay2, detail);
        Ok(())
    }

    pub fn set_tenant_ref(&mut self, slice_id: &str, tenant: Option<String>) -> Result<(), OrchestratorError> {
        let idx = self.slice_index(slice_id)?;
        self.slices[idx].tenant_ref = tenant;
        Ok(())
    }

    /// Releases every VM on every VIM, retracts the fabric graph and moves
    /// the slice to Terminated.
    pub fn terminate_slice(
        &mut self,
        vims: &mut VimSet,
        fabric: &mut Fabric,
        slice_id: &str,
        ts: u64,
    ) -> Result<(), OrchestratorError> {
        let slice_idx = self.slice_index(slice_id)?;
        let slice = &self.slices[slice_idx];
        if !matches!(
            slice.state,
            LifecycleState::Day0Done | LifecycleState::Day1Configured | LifecycleState::Running
        ) {
            return Err(OrchestratorError::InvalidState {
                slice: slice_id.to_string(),
                state: slice.state,
                expected: "Day0Done, Day1Configured or Running".to_string(),
            });
        }
        if let Some(tenant) = &slice.tenant_ref {
            return Err(OrchestratorError::TenantAttached {
                slice: slice_id.to_string(),
                tenant: tenant.clone(),
            });
        }
        self.transition(slice_idx, LifecycleState::Terminating, ts);

        let ns_ids = self.slices[slice_idx].ns_ids.clone();
        for ns_id in ns_ids.iter().rev() {
            let ns = self.ns_instance(ns_id).expect("slice ns").clone();
            for vm_id in ns.vm_ids.iter().rev() {
                let vim_name = vm_id.split('/').next().unwrap_or_default().to_string();
                let vim = vims.get_mut(&vim_name)?;
                vim.release_vm(vm_id, ts)?;
                self.log_event(ts, Some(slice_id), EventKind::VmReleased, vm_id.clone());
            }
            self.log_event(ts, Some(slice_id), EventKind::NsReleased, ns_id.clone());
        }
        if let Some(graph) = fabric.graph(slice_id) {
            let tag = graph.vlan_tag;
            fabric.retract_slice(slice_id)?;
            self.log_event(ts, Some(slice_id), EventKind::ChainRetracted, format!("tag {tag}"));
        }
        self.set_ns_states(slice_idx, LifecycleState::Terminated);
        self.transition(slice_idx, LifecycleState::Terminated, ts);
        Ok(())
    }
}
