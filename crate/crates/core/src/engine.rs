//! One engine = one orchestration session: the VIM registry, catalog and
//! slice state, tenant tree, fabric and metric store behind a single logical
//! clock. Commands mutate through `&mut self` one at a time, in arrival
//! order; queries borrow immutably and observe consistent state.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{BudgetError, DescriptorPackage, MetricName, ParseError, ResourceVector};
use crate::fabric::{Fabric, FabricError, IsolationReport};
use crate::nfvi::{NfviError, VimCapacity, VimSet, VimUsage, VmState};
use crate::orchestrator::{
    EventKind, EventRecord, LifecycleState, Orchestrator, OrchestratorError, PackageId, PlacementPlan,
};
use crate::registry::{self, SnapshotError};
use crate::telemetry::{
    self, MetricSample, MetricStore, ScenarioRun, Summary, TelemetryError, VmView, WorkloadScenario,
};
use crate::tenancy::{CellConfig, Share, TenancyError, TenantTree};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Nfvi(#[from] NfviError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Tenancy(#[from] TenancyError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl EngineError {
    /// Stable error name for operator output, e.g. `QuotaExceeded(memory)`.
    pub fn name(&self) -> String {
        fn nfvi_name(err: &NfviError) -> String {
            match err {
                NfviError::DuplicateVim(_) => "DuplicateVim".into(),
                NfviError::InvalidVimName(_) => "InvalidVimName".into(),
                NfviError::UnknownVim(_) => "UnknownVim".into(),
                NfviError::InvalidCapacity(_) => "InvalidCapacity".into(),
                NfviError::QuotaExceeded { resource, .. } => format!("QuotaExceeded({resource})"),
                NfviError::IpPoolExhausted(_) => "IpPoolExhausted".into(),
                NfviError::UnknownVm(_) => "UnknownVm".into(),
                NfviError::AlreadyReleased(_) => "AlreadyReleased".into(),
            }
        }
        fn fabric_name(err: &FabricError) -> String {
            match err {
                FabricError::AlreadyRegistered(_) => "AlreadyRegistered".into(),
                FabricError::DisconnectedGraph { .. } => "DisconnectedGraph".into(),
                FabricError::UnknownSlice(_) => "UnknownSlice".into(),
                FabricError::UnknownVm(_) => "UnknownVm".into(),
                FabricError::VmAlreadyRegistered { .. } => "VmAlreadyRegistered".into(),
            }
        }
        match self {
            EngineError::Parse(ParseError::Syntax(_)) => "ParseError(syntax)".into(),
            EngineError::Parse(ParseError::Invariant(_)) => "ParseError(invariant)".into(),
            EngineError::Budget(BudgetError::NoAffinity { .. }) => "BudgetError".into(),
            EngineError::Nfvi(err) => nfvi_name(err),
            EngineError::Orchestrator(err) => match err {
                OrchestratorError::ValidationFailed(_) => "ValidationFailed".into(),
                OrchestratorError::UnknownNsd(_) => "UnknownNsd".into(),
                OrchestratorError::UnknownNsid(_) => "UnknownNsid".into(),
                OrchestratorError::UnknownSlice(_) => "UnknownSlice".into(),
                OrchestratorError::UnknownVnfd(_) => "UnknownVnfd".into(),
                OrchestratorError::NoFeasiblePlacement { .. } => "NoFeasiblePlacement".into(),
                OrchestratorError::PlanIncomplete { .. } => "PlanIncomplete".into(),
                OrchestratorError::ChainError(_) => "ChainError".into(),
                OrchestratorError::InvalidState { .. } => "InvalidState".into(),
                OrchestratorError::TenantAttached { .. } => "TenantAttached".into(),
                OrchestratorError::Nfvi(inner) => nfvi_name(inner),
                OrchestratorError::Fabric(inner) => fabric_name(inner),
            },
            EngineError::Tenancy(err) => match err {
                TenancyError::Duplicate(_) => "Duplicate".into(),
                TenancyError::UnknownParent(_) => "UnknownParent".into(),
                TenancyError::InvalidShare(_) => "InvalidShare".into(),
                TenancyError::ShareExhausted { available } => format!("ShareExhausted({available})"),
                TenancyError::UnknownSlice(_) => "UnknownSlice".into(),
                TenancyError::AmbiguousSlice(_) => "AmbiguousSlice".into(),
                TenancyError::UnknownPath(_) => "UnknownPath".into(),
                TenancyError::SliceNotServing(_) => "SliceNotServing".into(),
                TenancyError::AlreadyAttached(_) => "AlreadyAttached".into(),
                TenancyError::UnknownUe(_) => "UnknownUe".into(),
                TenancyError::InstanceNotRunning(_) => "InstanceNotRunning".into(),
            },
            EngineError::Fabric(err) => fabric_name(err),
            EngineError::Telemetry(err) => match err {
                TelemetryError::UnknownVm(_) => "UnknownVm".into(),
                TelemetryError::VmNotActive(_) => "VmNotActive".into(),
                TelemetryError::OutOfRange(_) => "OutOfRange".into(),
                TelemetryError::NonMonotonicTimestamp { .. } => "NonMonotonicTimestamp".into(),
                TelemetryError::BadRange { .. } => "BadRange".into(),
                TelemetryError::EmptySeries { .. } => "EmptySeries".into(),
                TelemetryError::MissingCalibration { .. } => "MissingCalibration".into(),
            },
            EngineError::Snapshot(err) => match err {
                SnapshotError::UnsupportedVersion(_) => "UnsupportedVersion".into(),
                SnapshotError::CorruptSnapshot(_) => "CorruptSnapshot".into(),
                SnapshotError::Io(_) => "IoError".into(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Engine {
    pub(crate) clock: u64,
    pub vims: VimSet,
    pub orchestrator: Orchestrator,
    pub tenants: TenantTree,
    pub fabric: Fabric,
    pub metrics: MetricStore,
}

impl Engine {
    pub fn new() -> Engine {
        Engine::default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub(crate) fn set_clock(&mut self, clock: u64) {
        self.clock = clock;
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    // -- infrastructure -----------------------------------------------------

    pub fn create_vim(
        &mut self,
        name: &str,
        vcpus: u64,
        memory_mb: u64,
        storage_gb: u64,
        cidr: &str,
    ) -> Result<(), EngineError> {
        let ts = self.tick();
        let capacity = VimCapacity::new(vcpus, memory_mb, storage_gb, cidr)?;
        self.vims.create_vim(name, capacity)?;
        self.orchestrator.log_event(
            ts,
            None,
            EventKind::VimCreated,
            format!("{name} {vcpus} {memory_mb} {storage_gb} {cidr}"),
        );
        Ok(())
    }

    pub fn vim_usage(&self, name: &str) -> Result<VimUsage, EngineError> {
        Ok(self.vims.get(name)?.usage())
    }

    // -- catalog and slices ---------------------------------------------------

    pub fn onboard_package(&mut self, package: DescriptorPackage) -> Result<PackageId, EngineError> {
        let ts = self.tick();
        Ok(self.orchestrator.onboard_package(package, ts)?)
    }

    pub fn onboard_texts<S: AsRef<str>>(&mut self, texts: &[S]) -> Result<PackageId, EngineError> {
        let package = DescriptorPackage::from_texts(texts)?;
        self.onboard_package(package)
    }

    pub fn plan_placement(
        &self,
        nsid_id: &str,
        overrides: &BTreeMap<String, String>,
    ) -> Result<PlacementPlan, EngineError> {
        Ok(self.orchestrator.plan_placement(nsid_id, &self.vims, overrides)?)
    }

    pub fn instantiate_ns(&mut self, nsd_id: &str, vim_id: &str) -> Result<String, EngineError> {
        let ts = self.tick();
        let ns_id = self.orchestrator.instantiate_ns(&mut self.vims, nsd_id, vim_id, ts)?;
        self.register_vm_metrics();
        Ok(ns_id)
    }

    /// Plans placement (overrides first, then NSID affinities, then
    /// first-fit) and instantiates the end-to-end slice.
    pub fn create_slice(&mut self, nsid_id: &str, overrides: &BTreeMap<String, String>) -> Result<String, EngineError> {
        let plan = self.orchestrator.plan_placement(nsid_id, &self.vims, overrides)?;
        let ts = self.tick();
        let slice_id = self
            .orchestrator
            .instantiate_slice(&mut self.vims, &mut self.fabric, nsid_id, &plan, ts)?;
        self.register_vm_metrics();
        Ok(slice_id)
    }

    fn register_vm_metrics(&mut self) {
        for vim in self.vims.iter() {
            for vm in vim.vms() {
                self.metrics.register_vm(&vm.vm_id, vm.flavor.memory_mb);
            }
        }
    }

    pub fn day1_configure(&mut self, slice_id: &str) -> Result<usize, EngineError> {
        let ts = self.tick();
        Ok(self.orchestrator.day1_configure(&self.vims, slice_id, ts)?)
    }

    pub fn day2_reconfigure(
        &mut self,
        slice_id: &str,
        vnfd_id: &str,
        params: &[(String, String)],
    ) -> Result<(), EngineError> {
        let ts = self.tick();
        Ok(self.orchestrator.day2_reconfigure(slice_id, vnfd_id, params, ts)?)
    }

    pub fn terminate_slice(&mut self, slice_id: &str) -> Result<(), EngineError> {
        let ts = self.tick();
        Ok(self
            .orchestrator
            .terminate_slice(&mut self.vims, &mut self.fabric, slice_id, ts)?)
    }

    pub fn slice_state(&self, slice_id: &str) -> Option<LifecycleState> {
        self.orchestrator.slice(slice_id).map(|s| s.state)
    }

    pub fn events(&self) -> &[EventRecord] {
        self.orchestrator.events()
    }

    // -- tenancy --------------------------------------------------------------

    pub fn create_mno(&mut self, plmn_id: &str) -> Result<(), EngineError> {
        self.tick();
        Ok(self.tenants.create_mno(plmn_id)?)
    }

    pub fn create_mvno(&mut self, plmn_id: &str, mvno_id: &str, quota: Share) -> Result<(), EngineError> {
        self.tick();
        Ok(self.tenants.create_mvno(plmn_id, mvno_id, quota)?)
    }

    pub fn create_ran_slice(
        &mut self,
        plmn_id: &str,
        mvno_id: &str,
        slice_id: &str,
        share: Share,
    ) -> Result<(), EngineError> {
        self.tick();
        Ok(self.tenants.create_ran_slice(plmn_id, mvno_id, slice_id, share)?)
    }

    /// Binds a Running slice instance to a RAN slice and marks the instance
    /// tenant-attached (termination then requires unbinding first).
    pub fn bind_instance(
        &mut self,
        plmn_id: &str,
        mvno_id: &str,
        slice_id: &str,
        instance_id: &str,
    ) -> Result<(), EngineError> {
        self.tick();
        let running = self.slice_state(instance_id) == Some(LifecycleState::Running);
        self.tenants
            .bind_instance(plmn_id, mvno_id, slice_id, instance_id, running)?;
        self.orchestrator
            .set_tenant_ref(instance_id, Some(format!("{plmn_id}/{mvno_id}/{slice_id}")))?;
        Ok(())
    }

    pub fn unbind_instance(&mut self, instance_id: &str) -> Result<(), EngineError> {
        self.tick();
        self.tenants.unbind_instance(instance_id);
        if self.orchestrator.slice(instance_id).is_some() {
            self.orchestrator.set_tenant_ref(instance_id, None)?;
        }
        Ok(())
    }

    pub fn attach_ue(&mut self, ue_id: &str, plmn_id: &str, mvno_id: &str, slice_id: &str) -> Result<(), EngineError> {
        self.tick();
        let orchestrator = &self.orchestrator;
        self.tenants.attach_ue(ue_id, plmn_id, mvno_id, slice_id, |instance| {
            orchestrator.slice(instance).map(|s| s.state) == Some(LifecycleState::Running)
        })?;
        Ok(())
    }

    pub fn detach_ue(&mut self, ue_id: &str) -> Result<(), EngineError> {
        self.tick();
        Ok(self.tenants.detach_ue(ue_id)?)
    }

    pub fn allocate_prbs(
        &self,
        plmn_id: &str,
        total_prbs: u64,
        demands: &BTreeMap<String, u64>,
    ) -> Result<BTreeMap<String, u64>, EngineError> {
        let cell = CellConfig { total_prbs };
        Ok(self.tenants.allocate_prbs(plmn_id, &cell, demands)?)
    }

    // -- fabric ---------------------------------------------------------------

    pub fn isolation_report(&self) -> IsolationReport {
        self.fabric.isolation_report()
    }

    pub fn reachable(&self, vm_a: &str, vm_b: &str) -> Result<bool, EngineError> {
        Ok(self.fabric.reachable(vm_a, vm_b)?)
    }

    // -- telemetry ------------------------------------------------------------

    /// Records one sample. The VM must exist (or have existed) on some VIM;
    /// first-time targets are registered with their flavor's memory bound.
    pub fn record_metric(&mut self, vm_id: &str, metric: MetricName, ts: u64, value: f64) -> Result<(), EngineError> {
        self.tick();
        if let Some((_, vm)) = self.vims.find_vm(vm_id) {
            self.metrics.register_vm(vm_id, vm.flavor.memory_mb);
        }
        Ok(self.metrics.record(MetricSample {
            vm_id: vm_id.to_string(),
            metric,
            ts,
            value,
        })?)
    }

    pub fn query_metrics(
        &self,
        vm_id: &str,
        metric: MetricName,
        t0: u64,
        t1: u64,
    ) -> Result<Vec<MetricSample>, EngineError> {
        Ok(self.metrics.query_range(vm_id, metric, t0, t1)?)
    }

    pub fn summarize_metric(&self, vm_id: &str, metric: MetricName) -> Result<Summary, EngineError> {
        Ok(self.metrics.summarize(vm_id, metric)?)
    }

    /// Replays a workload scenario against the live VMs. The scenario
    /// timeline starts past everything already recorded, so a successful run
    /// never trips the monotonicity guard halfway through.
    pub fn run_scenario(&mut self, scenario: &WorkloadScenario) -> Result<ScenarioRun, EngineError> {
        let ts = self.tick();
        let base_ts = self.metrics.max_ts().map_or(ts, |t| t.max(ts) + 1);
        let mut views: BTreeMap<String, VmView> = BTreeMap::new();
        for vim in self.vims.iter() {
            for vm in vim.vms() {
                views.insert(
                    vm.vm_id.clone(),
                    VmView {
                        memory_mb: vm.flavor.memory_mb,
                        active: vm.state == VmState::Active,
                    },
                );
            }
        }
        let run = telemetry::run_scenario(&mut self.metrics, scenario, &views, base_ts)?;
        if let Some(max_ts) = self.metrics.max_ts() {
            self.clock = self.clock.max(max_ts);
        }
        Ok(run)
    }

    pub fn run_scenario_text(&mut self, text: &str) -> Result<ScenarioRun, EngineError> {
        let scenario = telemetry::parse_scenario(text)?;
        self.run_scenario(&scenario)
    }

    // -- persistence ----------------------------------------------------------

    pub fn save(&self, path: &Path) -> Result<(), EngineError> {
        Ok(registry::save(self, path)?)
    }

    pub fn load(path: &Path) -> Result<Engine, EngineError> {
        Ok(registry::load(path)?)
    }
}

/// Budget helper at the engine level so callers see one error type.
pub fn package_budget(
    package: &DescriptorPackage,
    default_vim: Option<&str>,
) -> Result<BTreeMap<String, ResourceVector>, EngineError> {
    Ok(crate::descriptor::resource_budget(package, default_vim)?)
}
