//! Simulated infrastructure managers. Each VIM owns a capacity ledger, the
//! VM records it instantiated and a management-network IP pool.
//!
//! A VIM is a single-writer state machine: mutations go through one `&mut`
//! owner, snapshots are plain values and can be read from anywhere. Time is
//! a logical clock advanced by callers; nothing here reads a wall clock.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{Flavor, ResourceVector, Vdu};

pub type LogicalTime = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceKind {
    Vcpus,
    Memory,
    Storage,
}

impl std::fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResourceKind::Vcpus => f.write_str("vcpus"),
            ResourceKind::Memory => f.write_str("memory"),
            ResourceKind::Storage => f.write_str("storage"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum NfviError {
    #[error("vim `{0}` already exists")]
    DuplicateVim(String),
    #[error("invalid vim name `{0}`: names are non-empty and free of whitespace and `/`")]
    InvalidVimName(String),
    #[error("vim `{0}` is not registered")]
    UnknownVim(String),
    #[error("invalid vim capacity: {0}")]
    InvalidCapacity(String),
    #[error("vim `{vim}`: insufficient {resource}")]
    QuotaExceeded { vim: String, resource: ResourceKind },
    #[error("vim `{0}`: management subnet has no free addresses")]
    IpPoolExhausted(String),
    #[error("vm `{0}` not found")]
    UnknownVm(String),
    #[error("vm `{0}` was already released")]
    AlreadyReleased(String),
}

/// IPv4 CIDR block backing a VIM's management network. The network address,
/// the gateway (`.1`) and the broadcast address are reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MgmtSubnet {
    network: u32,
    prefix: u8,
}

impl MgmtSubnet {
    pub fn parse(text: &str) -> Result<MgmtSubnet, NfviError> {
        let (addr, prefix) = text
            .split_once('/')
            .ok_or_else(|| NfviError::InvalidCapacity(format!("`{text}` is not CIDR notation")))?;
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| NfviError::InvalidCapacity(format!("`{addr}` is not an IPv4 address")))?;
        let prefix: u8 = prefix
            .parse()
            .map_err(|_| NfviError::InvalidCapacity(format!("`{prefix}` is not a prefix length")))?;
        if prefix > 32 {
            return Err(NfviError::InvalidCapacity(format!("prefix /{prefix} is out of range")));
        }
        let network = u32::from(addr);
        let host_bits = 32 - prefix;
        let mask: u32 = if host_bits == 32 { 0 } else { u32::MAX << host_bits };
        if network & !mask != 0 {
            return Err(NfviError::InvalidCapacity(format!(
                "`{text}` has host bits set; expected the network address"
            )));
        }
        let subnet = MgmtSubnet { network, prefix };
        if subnet.assignable_count() < 8 {
            return Err(NfviError::InvalidCapacity(format!(
                "subnet `{text}` holds {} assignable addresses, need at least 8",
                subnet.assignable_count()
            )));
        }
        Ok(subnet)
    }

    fn size(&self) -> u64 {
        1u64 << (32 - self.prefix)
    }

    /// Addresses available to VMs: everything minus network, gateway, broadcast.
    pub fn assignable_count(&self) -> u64 {
        self.size().saturating_sub(3)
    }

    fn addr_at(&self, offset: u32) -> Ipv4Addr {
        Ipv4Addr::from(self.network + offset)
    }

    /// First offset handed to VMs; 0 is the network address, 1 the gateway.
    const FIRST_OFFSET: u32 = 2;

    fn last_offset(&self) -> u32 {
        (self.size() - 2) as u32
    }
}

impl std::fmt::Display for MgmtSubnet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.network), self.prefix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VimCapacity {
    pub vcpus: u64,
    pub memory_mb: u64,
    pub storage_gb: u64,
    pub mgmt_subnet: MgmtSubnet,
}

impl VimCapacity {
    pub fn new(vcpus: u64, memory_mb: u64, storage_gb: u64, cidr: &str) -> Result<VimCapacity, NfviError> {
        if vcpus == 0 || memory_mb == 0 || storage_gb == 0 {
            return Err(NfviError::InvalidCapacity(
                "vcpus, memory-mb and storage-gb must all be positive".to_string(),
            ));
        }
        Ok(VimCapacity {
            vcpus,
            memory_mb,
            storage_gb,
            mgmt_subnet: MgmtSubnet::parse(cidr)?,
        })
    }

    pub fn resources(&self) -> ResourceVector {
        ResourceVector {
            vcpus: self.vcpus,
            memory_mb: self.memory_mb,
            storage_gb: self.storage_gb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VmState {
    Building,
    Active,
    Released,
}

impl std::fmt::Display for VmState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VmState::Building => f.write_str("building"),
            VmState::Active => f.write_str("active"),
            VmState::Released => f.write_str("released"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmRecord {
    pub vm_id: String,
    pub vdu_id: String,
    pub vnfd_id: String,
    pub slice_id: Option<String>,
    pub flavor: Flavor,
    pub mgmt_ip: Ipv4Addr,
    pub state: VmState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerEvent {
    Alloc,
    Release,
}

impl std::fmt::Display for LedgerEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LedgerEvent::Alloc => f.write_str("alloc"),
            LedgerEvent::Release => f.write_str("release"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub ts: LogicalTime,
    pub event: LedgerEvent,
    pub vm_id: String,
    pub flavor: Flavor,
}

impl LedgerEntry {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {} {}",
            self.ts, self.event, self.vm_id, self.flavor.vcpus, self.flavor.memory_mb, self.flavor.storage_gb
        )
    }
}

/// Point-in-time view of a VIM's resource state. Excludes the append-only
/// history and the id counter, so it is the right equality basis for
/// atomicity and rollback checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VimResourceSnapshot {
    pub allocated: ResourceVector,
    pub live_vms: BTreeSet<(String, Ipv4Addr)>,
    pub next_free_ip: Option<Ipv4Addr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VimUsage {
    pub name: String,
    pub allocated: ResourceVector,
    pub capacity: ResourceVector,
    pub vms: Vec<VmRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimVim {
    name: String,
    capacity: VimCapacity,
    allocated: ResourceVector,
    vms: Vec<VmRecord>,
    history: Vec<LedgerEntry>,
    ip_next_offset: u32,
    ip_released: BTreeSet<u32>,
    vm_seq: u64,
}

impl SimVim {
    pub fn new(name: &str, capacity: VimCapacity) -> SimVim {
        SimVim {
            name: name.to_string(),
            capacity,
            allocated: ResourceVector::default(),
            vms: Vec::new(),
            history: Vec::new(),
            ip_next_offset: MgmtSubnet::FIRST_OFFSET,
            ip_released: BTreeSet::new(),
            vm_seq: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn capacity(&self) -> &VimCapacity {
        &self.capacity
    }

    pub fn allocated(&self) -> ResourceVector {
        self.allocated
    }

    pub fn free(&self) -> ResourceVector {
        ResourceVector {
            vcpus: self.capacity.vcpus - self.allocated.vcpus,
            memory_mb: self.capacity.memory_mb - self.allocated.memory_mb,
            storage_gb: self.capacity.storage_gb - self.allocated.storage_gb,
        }
    }

    fn lowest_free_offset(&self) -> Option<u32> {
        match self.ip_released.first() {
            Some(&offset) => Some(offset),
            None if self.ip_next_offset <= self.capacity.mgmt_subnet.last_offset() => Some(self.ip_next_offset),
            None => None,
        }
    }

    fn first_insufficient(&self, flavor: &Flavor) -> Option<ResourceKind> {
        let free = self.free();
        if flavor.vcpus > free.vcpus {
            Some(ResourceKind::Vcpus)
        } else if flavor.memory_mb > free.memory_mb {
            Some(ResourceKind::Memory)
        } else if flavor.storage_gb > free.storage_gb {
            Some(ResourceKind::Storage)
        } else {
            None
        }
    }

    /// Allocates one VM for the VDU. All-or-nothing: on error neither the
    /// ledger nor the IP pool has changed.
    pub fn allocate_vdu(
        &mut self,
        vdu: &Vdu,
        vnfd_id: &str,
        slice_id: Option<&str>,
        ts: LogicalTime,
    ) -> Result<VmRecord, NfviError> {
        if let Some(resource) = self.first_insufficient(&vdu.flavor) {
            return Err(NfviError::QuotaExceeded {
                vim: self.name.clone(),
                resource,
            });
        }
        let offset = self
            .lowest_free_offset()
            .ok_or_else(|| NfviError::IpPoolExhausted(self.name.clone()))?;
        self.ip_released.remove(&offset);
        if offset == self.ip_next_offset {
            self.ip_next_offset += 1;
        }
        self.vm_seq += 1;
        let record = VmRecord {
            vm_id: format!("{}/vm-{}", self.name, self.vm_seq),
            vdu_id: vdu.id.clone(),
            vnfd_id: vnfd_id.to_string(),
            slice_id: slice_id.map(str::to_string),
            flavor: vdu.flavor,
            mgmt_ip: self.capacity.mgmt_subnet.addr_at(offset),
            state: VmState::Active,
        };
        self.allocated.add(&vdu.flavor);
        self.history.push(LedgerEntry {
            ts,
            event: LedgerEvent::Alloc,
            vm_id: record.vm_id.clone(),
            flavor: vdu.flavor,
        });
        self.vms.push(record.clone());
        Ok(record)
    }

    pub fn release_vm(&mut self, vm_id: &str, ts: LogicalTime) -> Result<(), NfviError> {
        let subnet = self.capacity.mgmt_subnet;
        let vm = self
            .vms
            .iter_mut()
            .find(|vm| vm.vm_id == vm_id)
            .ok_or_else(|| NfviError::UnknownVm(vm_id.to_string()))?;
        if vm.state == VmState::Released {
            return Err(NfviError::AlreadyReleased(vm_id.to_string()));
        }
        vm.state = VmState::Released;
        let flavor = vm.flavor;
        let offset = u32::from(vm.mgmt_ip) - u32::from(subnet.addr_at(0));
        self.allocated.sub(&flavor);
        self.ip_released.insert(offset);
        self.history.push(LedgerEntry {
            ts,
            event: LedgerEvent::Release,
            vm_id: vm_id.to_string(),
            flavor,
        });
        Ok(())
    }

    pub fn vm(&self, vm_id: &str) -> Option<&VmRecord> {
        self.vms.iter().find(|vm| vm.vm_id == vm_id)
    }

    pub fn vms(&self) -> &[VmRecord] {
        &self.vms
    }

    pub fn live_vms(&self) -> impl Iterator<Item = &VmRecord> {
        self.vms.iter().filter(|vm| vm.state != VmState::Released)
    }

    pub fn usage(&self) -> VimUsage {
        VimUsage {
            name: self.name.clone(),
            allocated: self.allocated,
            capacity: self.capacity.resources(),
            vms: self.vms.clone(),
        }
    }

    pub fn history(&self) -> &[LedgerEntry] {
        &self.history
    }

    pub fn history_lines(&self) -> Vec<String> {
        self.history.iter().map(LedgerEntry::to_line).collect()
    }

    /// Folds the append-only history back into running totals.
    pub fn replay_history(&self) -> ResourceVector {
        let mut totals = ResourceVector::default();
        for entry in &self.history {
            match entry.event {
                LedgerEvent::Alloc => totals.add(&entry.flavor),
                LedgerEvent::Release => totals.sub(&entry.flavor),
            }
        }
        totals
    }

    pub fn snapshot(&self) -> VimResourceSnapshot {
        VimResourceSnapshot {
            allocated: self.allocated,
            live_vms: self.live_vms().map(|vm| (vm.vm_id.clone(), vm.mgmt_ip)).collect(),
            next_free_ip: self.lowest_free_offset().map(|o| self.capacity.mgmt_subnet.addr_at(o)),
        }
    }
}

/// Registry of VIMs in registration order (placement iterates in this order).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VimSet {
    vims: Vec<SimVim>,
}

impl VimSet {
    pub fn new() -> VimSet {
        VimSet::default()
    }

    pub fn create_vim(&mut self, name: &str, capacity: VimCapacity) -> Result<&SimVim, NfviError> {
        // VM ids embed the vim name as `<vim>/vm-<n>`, so the name must not
        // contain the separator.
        if name.is_empty() || name.contains('/') || name.chars().any(char::is_whitespace) {
            return Err(NfviError::InvalidVimName(name.to_string()));
        }
        if self.vims.iter().any(|v| v.name == name) {
            return Err(NfviError::DuplicateVim(name.to_string()));
        }
        self.vims.push(SimVim::new(name, capacity));
        Ok(self.vims.last().expect("just pushed"))
    }

    pub fn get(&self, name: &str) -> Result<&SimVim, NfviError> {
        self.vims
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| NfviError::UnknownVim(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut SimVim, NfviError> {
        self.vims
            .iter_mut()
            .find(|v| v.name == name)
            .ok_or_else(|| NfviError::UnknownVim(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &SimVim> {
        self.vims.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.vims.iter().map(|v| v.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.vims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vims.is_empty()
    }

    /// Locates the VIM owning a VM id.
    pub fn find_vm(&self, vm_id: &str) -> Option<(&SimVim, &VmRecord)> {
        for vim in &self.vims {
            if let Some(vm) = vim.vm(vm_id) {
                return Some((vim, vm));
            }
        }
        None
    }

    pub fn snapshots(&self) -> Vec<VimResourceSnapshot> {
        self.vims.iter().map(SimVim::snapshot).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::InterfaceDef;
    use proptest::prelude::*;

    fn cap(vcpus: u64, memory_mb: u64, storage_gb: u64) -> VimCapacity {
        VimCapacity::new(vcpus, memory_mb, storage_gb, "10.0.1.0/24").unwrap()
    }

    fn vdu(id: &str, vcpus: u64, memory_mb: u64, storage_gb: u64) -> Vdu {
        Vdu {
            id: id.to_string(),
            image: "img".to_string(),
            flavor: Flavor {
                vcpus,
                memory_mb,
                storage_gb,
            },
            interfaces: vec![InterfaceDef {
                name: "mgmt0".into(),
                network: "mgmt".into(),
            }],
        }
    }

    #[test]
    fn fresh_vim_has_nothing_allocated() {
        let mut set = VimSet::new();
        let vim = set.create_vim("vim-ran", cap(8, 32768, 500)).unwrap();
        assert!(vim.allocated().is_zero());
        assert!(vim.usage().vms.is_empty());
    }

    #[test]
    fn duplicate_vim_name_is_rejected() {
        let mut set = VimSet::new();
        set.create_vim("vim-ran", cap(8, 32768, 500)).unwrap();
        assert_eq!(
            set.create_vim("vim-ran", cap(8, 32768, 500)).err(),
            Some(NfviError::DuplicateVim("vim-ran".into()))
        );
    }

    #[test]
    fn vim_names_cannot_contain_the_vm_id_separator() {
        let mut set = VimSet::new();
        for bad in ["", "a/b", "a b"] {
            assert_eq!(
                set.create_vim(bad, cap(1, 1, 1)).err(),
                Some(NfviError::InvalidVimName(bad.into()))
            );
        }
    }

    #[test]
    fn tiny_subnet_is_rejected() {
        // A /30 leaves 1 assignable address, a /29 leaves 5; both below 8.
        assert!(VimCapacity::new(8, 32768, 500, "10.0.1.0/30").is_err());
        assert!(VimCapacity::new(8, 32768, 500, "10.0.1.0/29").is_err());
        assert!(VimCapacity::new(8, 32768, 500, "10.0.1.0/28").is_ok());
    }

    #[test]
    fn zero_capacity_is_rejected() {
        assert!(VimCapacity::new(0, 1, 1, "10.0.1.0/24").is_err());
    }

    #[test]
    fn subnet_with_host_bits_is_rejected() {
        assert!(VimCapacity::new(1, 1, 1, "10.0.1.5/24").is_err());
    }

    #[test]
    fn first_vm_gets_dot_two() {
        let mut vim = SimVim::new("v", cap(8, 32768, 500));
        let vm = vim.allocate_vdu(&vdu("a", 1, 16384, 20), "f", None, 1).unwrap();
        assert_eq!(vm.mgmt_ip, Ipv4Addr::new(10, 0, 1, 2));
        assert_eq!(vm.state, VmState::Active);
        assert_eq!(vim.free().memory_mb, 16384);
    }

    #[test]
    fn third_sixteen_gig_vm_exceeds_memory() {
        // 3 x 16384 MB > 32768 MB while vcpus and storage still fit.
        let mut vim = SimVim::new("v", cap(8, 32768, 500));
        vim.allocate_vdu(&vdu("a", 1, 16384, 20), "f", None, 1).unwrap();
        vim.allocate_vdu(&vdu("b", 1, 16384, 20), "f", None, 2).unwrap();
        let err = vim.allocate_vdu(&vdu("c", 1, 16384, 20), "f", None, 3).unwrap_err();
        assert_eq!(
            err,
            NfviError::QuotaExceeded {
                vim: "v".into(),
                resource: ResourceKind::Memory
            }
        );
    }

    #[test]
    fn quota_checks_run_in_declared_order() {
        let mut vim = SimVim::new("v", cap(1, 1, 1));
        // Both vcpus and memory are insufficient; vcpus is named first.
        let err = vim.allocate_vdu(&vdu("a", 2, 2, 1), "f", None, 1).unwrap_err();
        assert_eq!(
            err,
            NfviError::QuotaExceeded {
                vim: "v".into(),
                resource: ResourceKind::Vcpus
            }
        );
    }

    #[test]
    fn exact_fit_leaves_zero_free() {
        let mut vim = SimVim::new("v", cap(2, 32768, 40));
        vim.allocate_vdu(&vdu("a", 1, 16384, 20), "f", None, 1).unwrap();
        vim.allocate_vdu(&vdu("b", 1, 16384, 20), "f", None, 2).unwrap();
        assert!(vim.free().is_zero());
    }

    #[test]
    fn release_returns_ledger_to_zero() {
        let mut vim = SimVim::new("v", cap(8, 32768, 500));
        let vm = vim.allocate_vdu(&vdu("a", 1, 16384, 20), "f", None, 1).unwrap();
        vim.release_vm(&vm.vm_id, 2).unwrap();
        assert!(vim.allocated().is_zero());
        assert_eq!(vim.vm(&vm.vm_id).unwrap().state, VmState::Released);
    }

    #[test]
    fn released_ip_is_reused_lowest_first() {
        let mut vim = SimVim::new("v", cap(8, 32768, 500));
        let a = vim.allocate_vdu(&vdu("a", 1, 1024, 5), "f", None, 1).unwrap();
        let _b = vim.allocate_vdu(&vdu("b", 1, 1024, 5), "f", None, 2).unwrap();
        vim.release_vm(&a.vm_id, 3).unwrap();
        let c = vim.allocate_vdu(&vdu("c", 1, 1024, 5), "f", None, 4).unwrap();
        assert_eq!(c.mgmt_ip, a.mgmt_ip);
    }

    #[test]
    fn release_errors() {
        let mut vim = SimVim::new("v", cap(8, 32768, 500));
        assert_eq!(vim.release_vm("v/vm-9", 1), Err(NfviError::UnknownVm("v/vm-9".into())));
        let vm = vim.allocate_vdu(&vdu("a", 1, 1024, 5), "f", None, 2).unwrap();
        vim.release_vm(&vm.vm_id, 3).unwrap();
        assert_eq!(vim.release_vm(&vm.vm_id, 4), Err(NfviError::AlreadyReleased(vm.vm_id)));
    }

    #[test]
    fn failed_allocation_changes_nothing() {
        let mut vim = SimVim::new("v", cap(2, 4096, 40));
        vim.allocate_vdu(&vdu("a", 1, 1024, 5), "f", None, 1).unwrap();
        let before = vim.snapshot();
        let history_len = vim.history().len();
        assert!(vim.allocate_vdu(&vdu("big", 8, 1024, 5), "f", None, 2).is_err());
        assert_eq!(vim.snapshot(), before);
        assert_eq!(vim.history().len(), history_len);
    }

    #[test]
    fn history_lines_use_documented_format() {
        let mut vim = SimVim::new("v", cap(8, 32768, 500));
        let vm = vim.allocate_vdu(&vdu("a", 1, 16384, 20), "f", None, 7).unwrap();
        vim.release_vm(&vm.vm_id, 9).unwrap();
        assert_eq!(
            vim.history_lines(),
            vec![
                "7 alloc v/vm-1 1 16384 20".to_string(),
                "9 release v/vm-1 1 16384 20".to_string(),
            ]
        );
    }

    #[test]
    fn usage_after_epc_sized_placement() {
        let mut vim = SimVim::new("vim-cn", cap(8, 131072, 500));
        for name in ["hss", "mme", "spgw-c", "spgw-u"] {
            vim.allocate_vdu(&vdu(name, 1, 16384, 20), "oai-epc", Some("s"), 1)
                .unwrap();
        }
        assert_eq!(
            vim.allocated(),
            ResourceVector {
                vcpus: 4,
                memory_mb: 65536,
                storage_gb: 80
            }
        );
    }

    #[derive(Debug, Clone)]
    enum Op {
        Alloc(Flavor),
        Release(usize),
    }

    fn arb_op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (1u64..4, 1u64..8192, 1u64..50).prop_map(|(v, m, s)| Op::Alloc(Flavor {
                vcpus: v,
                memory_mb: m,
                storage_gb: s
            })),
            (0usize..64).prop_map(Op::Release),
        ]
    }

    proptest! {
        /// Model-based check: conservation, IP uniqueness, lowest-free IP
        /// assignment and history replay all hold under random workloads.
        #[test]
        fn random_ops_respect_ledger_invariants(ops in prop::collection::vec(arb_op(), 1..120)) {
            let mut vim = SimVim::new("v", cap(16, 65536, 1000));
            // Model: sorted free-offset set plus live VM list.
            let mut model_free: BTreeSet<u32> = (2u32..=253).collect();
            let mut live: Vec<(String, Flavor, Ipv4Addr)> = Vec::new();
            let mut ts = 0u64;
            for op in ops {
                ts += 1;
                match op {
                    Op::Alloc(flavor) => {
                        let free = vim.free();
                        let fits = flavor.vcpus <= free.vcpus
                            && flavor.memory_mb <= free.memory_mb
                            && flavor.storage_gb <= free.storage_gb;
                        let before = vim.snapshot();
                        let result = vim.allocate_vdu(
                            &Vdu {
                                id: "d".into(),
                                image: "i".into(),
                                flavor,
                                interfaces: vec![],
                            },
                            "f",
                            None,
                            ts,
                        );
                        if fits {
                            let vm = result.unwrap();
                            let expected_offset = *model_free.first().unwrap();
                            prop_assert_eq!(vm.mgmt_ip, Ipv4Addr::from(u32::from(Ipv4Addr::new(10, 0, 1, 0)) + expected_offset));
                            model_free.remove(&expected_offset);
                            live.push((vm.vm_id.clone(), flavor, vm.mgmt_ip));
                        } else {
                            prop_assert!(result.is_err());
                            prop_assert_eq!(vim.snapshot(), before);
                        }
                    }
                    Op::Release(idx) => {
                        if live.is_empty() {
                            continue;
                        }
                        let (vm_id, _, ip) = live.remove(idx % live.len());
                        vim.release_vm(&vm_id, ts).unwrap();
                        model_free.insert(u32::from(ip) - u32::from(Ipv4Addr::new(10, 0, 1, 0)));
                    }
                }
                // Conservation: allocated equals the sum over live VMs.
                let mut sum = ResourceVector::default();
                for (_, flavor, _) in &live {
                    sum.add(flavor);
                }
                prop_assert_eq!(vim.allocated(), sum);
                // Replay: the history folds back to the live totals.
                prop_assert_eq!(vim.replay_history(), vim.allocated());
                // IP uniqueness among live VMs.
                let ips: BTreeSet<Ipv4Addr> = vim.live_vms().map(|vm| vm.mgmt_ip).collect();
                prop_assert_eq!(ips.len(), live.len());
            }
        }
    }
}
