//! Operator command-line surface. Every subcommand is a thin adapter over
//! one engine operation; `dispatch` runs against an in-memory engine and
//! `run_with_state` adds snapshot load/save around it (driven by the
//! `SLICEKIT_STATE` environment variable in `main`).
//!
//! Exit codes: 0 success, 1 domain error (module error names echoed
//! verbatim on stderr), 2 usage error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use slicekit_core::descriptor::DescriptorPackage;
use slicekit_core::engine::{package_budget, Engine, EngineError};
use slicekit_core::tenancy::Share;
use slicekit_core::MetricName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Lines,
}

#[derive(Debug, Parser)]
#[command(
    name = "slicekit",
    version,
    about = "Desk-scale end-to-end network slice orchestration"
)]
struct Cli {
    /// Output format: human tables or the documented line grammars.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulated infrastructure managers.
    Vim {
        #[command(subcommand)]
        cmd: VimCmd,
    },
    /// Descriptor packages.
    Pkg {
        #[command(subcommand)]
        cmd: PkgCmd,
    },
    /// Standalone network service instances.
    Ns {
        #[command(subcommand)]
        cmd: NsCmd,
    },
    /// End-to-end slices.
    Slice {
        #[command(subcommand)]
        cmd: SliceCmd,
    },
    /// Tenant hierarchy and UE attachment.
    Tenant {
        #[command(subcommand)]
        cmd: TenantCmd,
    },
    /// Radio resource allocation.
    Prb {
        #[command(subcommand)]
        cmd: PrbCmd,
    },
    /// Transport fabric queries.
    Fabric {
        #[command(subcommand)]
        cmd: FabricCmd,
    },
    /// Metric recording and queries.
    Metric {
        #[command(subcommand)]
        cmd: MetricCmd,
    },
    /// Workload scenario replay.
    Scenario {
        #[command(subcommand)]
        cmd: ScenarioCmd,
    },
    /// Session snapshots.
    State {
        #[command(subcommand)]
        cmd: StateCmd,
    },
}

#[derive(Debug, Subcommand)]
enum VimCmd {
    /// Register a VIM: name, vcpus, memory (MB), storage (GB), mgmt CIDR.
    Create {
        name: String,
        vcpus: u64,
        memory_mb: u64,
        storage_gb: u64,
        cidr: String,
    },
    List,
    /// Allocation snapshot and VM list; lines mode prints the ledger history.
    Usage {
        name: String,
    },
}

#[derive(Debug, Subcommand)]
enum PkgCmd {
    /// Validate and store a package (one or more descriptor files).
    Onboard { files: Vec<PathBuf> },
    /// Cross-level validation report without storing anything.
    Validate { files: Vec<PathBuf> },
    /// Per-VIM resource totals the package would consume.
    Budget {
        files: Vec<PathBuf>,
        #[arg(long)]
        default_vim: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum NsCmd {
    /// Instantiate one network service on one VIM.
    Create { nsd_id: String, vim_id: String },
}

#[derive(Debug, Subcommand)]
enum SliceCmd {
    /// Plan placement and instantiate the NSID end to end.
    Create {
        nsid_id: String,
        /// Placement override per NSD, e.g. --vim oai-epc-nsd=vim-cn.
        #[arg(long = "vim", value_name = "NSD=VIM")]
        vims: Vec<String>,
    },
    Day1 {
        slice_id: String,
    },
    Day2 {
        slice_id: String,
        vnfd_id: String,
        /// Reconfiguration parameters, e.g. --param tac=7.
        #[arg(long = "param", value_name = "K=V")]
        params: Vec<String>,
    },
    Terminate {
        slice_id: String,
    },
    List,
}

#[derive(Debug, Subcommand)]
enum TenantCmd {
    /// Create an MNO identified by its PLMN id.
    Mno { plmn: String },
    /// Create an MVNO under an MNO.
    Mvno {
        plmn: String,
        mvno: String,
        #[arg(long, default_value = "1")]
        quota: String,
    },
    /// Create a RAN slice (share required), or bind/unbind a slice instance.
    Slice {
        plmn: String,
        mvno: String,
        slice: String,
        share: Option<String>,
        /// Bind this Running slice instance to the RAN slice.
        #[arg(long)]
        instance: Option<String>,
        /// Unbind whatever instance is currently attached.
        #[arg(long)]
        unbind_instance: bool,
    },
    /// Attach a UE to plmn/mvno/slice.
    Attach {
        ue: String,
        plmn: String,
        mvno: String,
        slice: String,
    },
    /// Detach a UE.
    Detach { ue: String },
}

#[derive(Debug, Subcommand)]
enum PrbCmd {
    /// Allocate PRBs of one cell among slices: demands as slice=prbs.
    Allocate {
        plmn: String,
        total_prbs: u64,
        #[arg(value_name = "SLICE=DEMAND", required = true)]
        demands: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum FabricCmd {
    /// Per-slice VLAN tags and the cross-slice edge count; lines mode prints
    /// the graph export.
    Report,
}

#[derive(Debug, Subcommand)]
enum MetricCmd {
    Record {
        vm_id: String,
        metric: String,
        ts: u64,
        value: f64,
    },
    Query {
        vm_id: String,
        metric: String,
        t0: u64,
        t1: u64,
    },
    Summarize {
        vm_id: String,
        metric: String,
    },
}

#[derive(Debug, Subcommand)]
enum ScenarioCmd {
    /// Replay a workload scenario file against the live VMs.
    Run { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum StateCmd {
    Save { path: PathBuf },
    Load { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum CliError {
    Usage(String),
    Domain(EngineError),
    /// Domain failure that still carries operator-facing output (validation
    /// findings are data, and they go to stdout even on exit 1).
    DomainWithOutput {
        stdout: String,
        error: EngineError,
    },
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        CliError::Domain(err)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_metric(name: &str) -> Result<MetricName, CliError> {
    MetricName::parse(name).ok_or_else(|| {
        usage(format!(
            "unknown metric `{name}` (expected cpu_utilization_pct, memory_utilization_mb or throughput_mbps)"
        ))
    })
}

fn parse_pair(text: &str, what: &str) -> Result<(String, String), CliError> {
    text.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| usage(format!("`{text}` is not a {what} (expected K=V)")))
}

fn parse_share(text: &str) -> Result<Share, CliError> {
    Share::parse(text).map_err(|e| usage(format!("{e}")))
}

fn read_files(files: &[PathBuf]) -> Result<Vec<String>, CliError> {
    if files.is_empty() {
        return Err(usage("at least one descriptor file is required"));
    }
    files
        .iter()
        .map(|path| std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display()))))
        .collect()
}

fn load_package(files: &[PathBuf]) -> Result<DescriptorPackage, CliError> {
    let texts = read_files(files)?;
    Ok(DescriptorPackage::from_texts(&texts).map_err(EngineError::from)?)
}

/// Runs one command against the engine. No snapshot I/O happens here.
pub fn dispatch(engine: &mut Engine, argv: &[String]) -> CommandResult {
    let mut full = vec!["slicekit".to_string()];
    full.extend(argv.iter().cloned());
    let cli = match Cli::try_parse_from(&full) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders help/version on stdout with success; everything
            // else is a usage error.
            let rendered = err.render().to_string();
            return if err.exit_code() == 0 {
                CommandResult {
                    exit_code: 0,
                    stdout: rendered,
                    stderr: String::new(),
                }
            } else {
                CommandResult {
                    exit_code: 2,
                    stdout: String::new(),
                    stderr: rendered,
                }
            };
        }
    };
    match execute(engine, cli.format, cli.command) {
        Ok(stdout) => CommandResult {
            exit_code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(CliError::Usage(msg)) => CommandResult {
            exit_code: 2,
            stdout: String::new(),
            stderr: format!("usage error: {msg}\n"),
        },
        Err(CliError::Domain(err)) => CommandResult {
            exit_code: 1,
            stdout: String::new(),
            stderr: format!("{}: {err}\n", err.name()),
        },
        Err(CliError::DomainWithOutput { stdout, error }) => CommandResult {
            exit_code: 1,
            stdout,
            stderr: format!("{}: {error}\n", error.name()),
        },
    }
}

/// Event lines emitted after `mark`, one per line.
fn new_event_lines(engine: &Engine, mark: usize) -> String {
    engine.events()[mark..].iter().map(|e| e.to_line() + "\n").collect()
}

fn vm_row(engine: &Engine, vm_id: &str) -> String {
    match engine.vims.find_vm(vm_id) {
        Some((vim, vm)) => format!(
            "{}  vdu={} vnfd={} vim={} ip={} state={}",
            vm.vm_id,
            vm.vdu_id,
            vm.vnfd_id,
            vim.name(),
            vm.mgmt_ip,
            vm.state
        ),
        None => vm_id.to_string(),
    }
}

fn execute(engine: &mut Engine, format: Format, command: Command) -> Result<String, CliError> {
    match command {
        Command::Vim { cmd } => vim_cmd(engine, format, cmd),
        Command::Pkg { cmd } => pkg_cmd(engine, format, cmd),
        Command::Ns { cmd } => ns_cmd(engine, format, cmd),
        Command::Slice { cmd } => slice_cmd(engine, format, cmd),
        Command::Tenant { cmd } => tenant_cmd(engine, cmd),
        Command::Prb { cmd } => prb_cmd(engine, format, cmd),
        Command::Fabric { cmd } => fabric_cmd(engine, format, cmd),
        Command::Metric { cmd } => metric_cmd(engine, format, cmd),
        Command::Scenario { cmd } => scenario_cmd(engine, format, cmd),
        Command::State { cmd } => state_cmd(engine, cmd),
    }
}

fn vim_cmd(engine: &mut Engine, format: Format, cmd: VimCmd) -> Result<String, CliError> {
    match cmd {
        VimCmd::Create {
            name,
            vcpus,
            memory_mb,
            storage_gb,
            cidr,
        } => {
            let mark = engine.events().len();
            engine.create_vim(&name, vcpus, memory_mb, storage_gb, &cidr)?;
            Ok(match format {
                Format::Lines => new_event_lines(engine, mark),
                Format::Table => {
                    format!("vim {name} registered ({vcpus} vcpus, {memory_mb} MB, {storage_gb} GB, {cidr})\n")
                }
            })
        }
        VimCmd::List => {
            let mut out = String::new();
            for vim in engine.vims.iter() {
                let a = vim.allocated();
                let c = vim.capacity();
                match format {
                    Format::Lines => out.push_str(&format!(
                        "{} {} {} {} {} {} {} {}\n",
                        vim.name(),
                        a.vcpus,
                        c.vcpus,
                        a.memory_mb,
                        c.memory_mb,
                        a.storage_gb,
                        c.storage_gb,
                        c.mgmt_subnet
                    )),
                    Format::Table => out.push_str(&format!(
                        "{}  vcpus {}/{}  memory-mb {}/{}  storage-gb {}/{}  subnet {}\n",
                        vim.name(),
                        a.vcpus,
                        c.vcpus,
                        a.memory_mb,
                        c.memory_mb,
                        a.storage_gb,
                        c.storage_gb,
                        c.mgmt_subnet
                    )),
                }
            }
            Ok(out)
        }
        VimCmd::Usage { name } => {
            let vim = engine.vims.get(&name).map_err(EngineError::from)?;
            match format {
                Format::Lines => Ok(vim.history_lines().into_iter().map(|l| l + "\n").collect()),
                Format::Table => {
                    let usage = vim.usage();
                    let mut out = format!(
                        "vim {name}: vcpus {}/{}  memory-mb {}/{}  storage-gb {}/{}\n",
                        usage.allocated.vcpus,
                        usage.capacity.vcpus,
                        usage.allocated.memory_mb,
                        usage.capacity.memory_mb,
                        usage.allocated.storage_gb,
                        usage.capacity.storage_gb
                    );
                    for vm in &usage.vms {
                        out.push_str(&format!(
                            "{}  vdu={} vnfd={} slice={} ip={} state={}\n",
                            vm.vm_id,
                            vm.vdu_id,
                            vm.vnfd_id,
                            vm.slice_id.as_deref().unwrap_or("-"),
                            vm.mgmt_ip,
                            vm.state
                        ));
                    }
                    Ok(out)
                }
            }
        }
    }
}

fn pkg_cmd(engine: &mut Engine, format: Format, cmd: PkgCmd) -> Result<String, CliError> {
    match cmd {
        PkgCmd::Onboard { files } => {
            let package = load_package(&files)?;
            let id = engine.onboard_package(package)?;
            Ok(match format {
                Format::Lines => format!("{id}\n"),
                Format::Table => format!("onboarded {id}\n"),
            })
        }
        PkgCmd::Validate { files } => {
            let package = load_package(&files)?;
            let report = slicekit_core::validate_package(&package.vnfds, &package.nsds, &package.nsid);
            if report.is_clean() {
                Ok(match format {
                    Format::Lines => String::new(),
                    Format::Table => "clean\n".to_string(),
                })
            } else {
                Err(CliError::DomainWithOutput {
                    stdout: report.to_lines().into_iter().map(|l| l + "\n").collect(),
                    error: EngineError::from(slicekit_core::orchestrator::OrchestratorError::ValidationFailed(report)),
                })
            }
        }
        PkgCmd::Budget { files, default_vim } => {
            let package = load_package(&files)?;
            let budget = package_budget(&package, default_vim.as_deref())?;
            let mut out = String::new();
            for (vim, totals) in &budget {
                match format {
                    Format::Lines => out.push_str(&format!(
                        "{vim} {} {} {}\n",
                        totals.vcpus, totals.memory_mb, totals.storage_gb
                    )),
                    Format::Table => out.push_str(&format!(
                        "{vim}  vcpus {}  memory-mb {}  storage-gb {}\n",
                        totals.vcpus, totals.memory_mb, totals.storage_gb
                    )),
                }
            }
            Ok(out)
        }
    }
}

fn ns_cmd(engine: &mut Engine, format: Format, cmd: NsCmd) -> Result<String, CliError> {
    match cmd {
        NsCmd::Create { nsd_id, vim_id } => {
            let mark = engine.events().len();
            let ns_id = engine.instantiate_ns(&nsd_id, &vim_id)?;
            match format {
                Format::Lines => Ok(new_event_lines(engine, mark)),
                Format::Table => {
                    let ns = engine.orchestrator.ns_instance(&ns_id).expect("just created");
                    let mut out = format!("{ns_id} ({nsd_id} on {vim_id})\n");
                    for vm_id in ns.vm_ids.clone() {
                        out.push_str(&vm_row(engine, &vm_id));
                        out.push('\n');
                    }
                    Ok(out)
                }
            }
        }
    }
}

fn slice_cmd(engine: &mut Engine, format: Format, cmd: SliceCmd) -> Result<String, CliError> {
    match cmd {
        SliceCmd::Create { nsid_id, vims } => {
            let mut overrides = BTreeMap::new();
            for pair in &vims {
                let (nsd, vim) = parse_pair(pair, "placement override")?;
                overrides.insert(nsd, vim);
            }
            let mark = engine.events().len();
            let slice_id = engine.create_slice(&nsid_id, &overrides)?;
            match format {
                Format::Lines => Ok(new_event_lines(engine, mark)),
                Format::Table => {
                    let state = engine.slice_state(&slice_id).expect("just created");
                    let mut out = format!("{slice_id} ({nsid_id}) state={state}\n");
                    for vm_id in engine.orchestrator.slice_vm_ids(&slice_id) {
                        out.push_str(&vm_row(engine, &vm_id));
                        out.push('\n');
                    }
                    Ok(out)
                }
            }
        }
        SliceCmd::Day1 { slice_id } => {
            let mark = engine.events().len();
            let configured = engine.day1_configure(&slice_id)?;
            Ok(match format {
                Format::Lines => new_event_lines(engine, mark),
                Format::Table => format!(
                    "{slice_id} state={} ({configured} config events)\n",
                    engine.slice_state(&slice_id).expect("slice exists")
                ),
            })
        }
        SliceCmd::Day2 {
            slice_id,
            vnfd_id,
            params,
        } => {
            let params: Vec<(String, String)> = params
                .iter()
                .map(|p| parse_pair(p, "parameter"))
                .collect::<Result<_, _>>()?;
            let mark = engine.events().len();
            engine.day2_reconfigure(&slice_id, &vnfd_id, &params)?;
            Ok(match format {
                Format::Lines => new_event_lines(engine, mark),
                Format::Table => format!("{slice_id} reconfigured {vnfd_id}\n"),
            })
        }
        SliceCmd::Terminate { slice_id } => {
            let mark = engine.events().len();
            engine.terminate_slice(&slice_id)?;
            Ok(match format {
                Format::Lines => new_event_lines(engine, mark),
                Format::Table => format!("{slice_id} terminated\n"),
            })
        }
        SliceCmd::List => {
            let mut out = String::new();
            for slice in engine.orchestrator.slices() {
                let vm_count = engine.orchestrator.slice_vm_ids(&slice.slice_id).len();
                match format {
                    Format::Lines => out.push_str(&format!(
                        "{} {} {} {} {}\n",
                        slice.slice_id,
                        slice.nsid_id,
                        slice.state,
                        slice.ns_ids.len(),
                        vm_count
                    )),
                    Format::Table => out.push_str(&format!(
                        "{}  nsid={} state={} ns={} vms={} tenant={}\n",
                        slice.slice_id,
                        slice.nsid_id,
                        slice.state,
                        slice.ns_ids.len(),
                        vm_count,
                        slice.tenant_ref.as_deref().unwrap_or("-")
                    )),
                }
            }
            Ok(out)
        }
    }
}

fn tenant_cmd(engine: &mut Engine, cmd: TenantCmd) -> Result<String, CliError> {
    match cmd {
        TenantCmd::Mno { plmn } => {
            engine.create_mno(&plmn)?;
            Ok(format!("mno {plmn} created\n"))
        }
        TenantCmd::Mvno { plmn, mvno, quota } => {
            let quota = parse_share(&quota)?;
            engine.create_mvno(&plmn, &mvno, quota)?;
            Ok(format!("mvno {plmn}/{mvno} created\n"))
        }
        TenantCmd::Slice {
            plmn,
            mvno,
            slice,
            share,
            instance,
            unbind_instance,
        } => {
            let mut out = String::new();
            if let Some(share) = share {
                let share = parse_share(&share)?;
                engine.create_ran_slice(&plmn, &mvno, &slice, share)?;
                out.push_str(&format!("ran slice {plmn}/{mvno}/{slice} created (share {share})\n"));
            }
            if let Some(instance) = instance {
                engine.bind_instance(&plmn, &mvno, &slice, &instance)?;
                out.push_str(&format!("instance {instance} bound to {plmn}/{mvno}/{slice}\n"));
            } else if unbind_instance {
                let bound = engine
                    .tenants
                    .slice(&plmn, &mvno, &slice)
                    .and_then(|s| s.attached_instance.clone());
                match bound {
                    Some(instance) => {
                        engine.unbind_instance(&instance)?;
                        out.push_str(&format!("instance {instance} unbound from {plmn}/{mvno}/{slice}\n"));
                    }
                    None => return Err(usage(format!("no instance bound to {plmn}/{mvno}/{slice}"))),
                }
            }
            if out.is_empty() {
                return Err(usage(
                    "tenant slice needs a share to create, --instance to bind, or --unbind-instance",
                ));
            }
            Ok(out)
        }
        TenantCmd::Attach { ue, plmn, mvno, slice } => {
            engine.attach_ue(&ue, &plmn, &mvno, &slice)?;
            Ok(format!("ue {ue} attached to {plmn}/{mvno}/{slice}\n"))
        }
        TenantCmd::Detach { ue } => {
            engine.detach_ue(&ue)?;
            Ok(format!("ue {ue} detached\n"))
        }
    }
}

fn prb_cmd(engine: &mut Engine, format: Format, cmd: PrbCmd) -> Result<String, CliError> {
    match cmd {
        PrbCmd::Allocate {
            plmn,
            total_prbs,
            demands,
        } => {
            let mut demand_map = BTreeMap::new();
            for pair in &demands {
                let (slice, demand) = parse_pair(pair, "demand")?;
                let demand: u64 = demand
                    .parse()
                    .map_err(|_| usage(format!("`{demand}` is not a PRB count")))?;
                demand_map.insert(slice, demand);
            }
            let grants = engine.allocate_prbs(&plmn, total_prbs, &demand_map)?;
            let mut out = String::new();
            for (slice, grant) in &grants {
                match format {
                    Format::Lines => out.push_str(&format!("{slice} {grant}\n")),
                    Format::Table => {
                        out.push_str(&format!("{slice}  granted {grant} (demand {})\n", demand_map[slice]))
                    }
                }
            }
            Ok(out)
        }
    }
}

fn fabric_cmd(engine: &mut Engine, format: Format, cmd: FabricCmd) -> Result<String, CliError> {
    match cmd {
        FabricCmd::Report => match format {
            Format::Lines => Ok(engine.fabric.export_lines().into_iter().map(|l| l + "\n").collect()),
            Format::Table => {
                let report = engine.isolation_report();
                let mut out = String::new();
                for entry in &report.slices {
                    out.push_str(&format!(
                        "{}  vlan={} nodes={} edges={}\n",
                        entry.slice_id, entry.vlan_tag, entry.nodes, entry.edges
                    ));
                }
                out.push_str(&format!("cross-slice edges: {}\n", report.cross_slice_edges));
                Ok(out)
            }
        },
    }
}

fn metric_cmd(engine: &mut Engine, format: Format, cmd: MetricCmd) -> Result<String, CliError> {
    match cmd {
        MetricCmd::Record {
            vm_id,
            metric,
            ts,
            value,
        } => {
            let metric = parse_metric(&metric)?;
            engine.record_metric(&vm_id, metric, ts, value)?;
            Ok(match format {
                Format::Lines => String::new(),
                Format::Table => format!("recorded {vm_id} {metric} {ts} {value}\n"),
            })
        }
        MetricCmd::Query { vm_id, metric, t0, t1 } => {
            let metric = parse_metric(&metric)?;
            let samples = engine.query_metrics(&vm_id, metric, t0, t1)?;
            let mut out = String::from("vm_id,metric,ts,value\n");
            for s in samples {
                out.push_str(&format!("{},{},{},{}\n", s.vm_id, s.metric, s.ts, s.value));
            }
            Ok(out)
        }
        MetricCmd::Summarize { vm_id, metric } => {
            let metric = parse_metric(&metric)?;
            let summary = engine.summarize_metric(&vm_id, metric)?;
            Ok(match format {
                Format::Lines => format!("{vm_id} {metric} {} {} {}\n", summary.max, summary.mean, summary.count),
                Format::Table => format!(
                    "{vm_id} {metric}: max {} mean {} samples {}\n",
                    summary.max, summary.mean, summary.count
                ),
            })
        }
    }
}

fn scenario_cmd(engine: &mut Engine, format: Format, cmd: ScenarioCmd) -> Result<String, CliError> {
    match cmd {
        ScenarioCmd::Run { file } => {
            let text =
                std::fs::read_to_string(&file).map_err(|e| usage(format!("cannot read {}: {e}", file.display())))?;
            let run = engine.run_scenario_text(&text)?;
            let mut out = String::new();
            for (vm, count) in &run.samples_per_vm {
                match format {
                    Format::Lines => out.push_str(&format!("{vm} {count}\n")),
                    Format::Table => out.push_str(&format!("{vm}: {count} collection points\n")),
                }
            }
            Ok(out)
        }
    }
}

fn state_cmd(engine: &mut Engine, cmd: StateCmd) -> Result<String, CliError> {
    match cmd {
        StateCmd::Save { path } => {
            engine.save(&path)?;
            Ok(format!("state saved to {}\n", path.display()))
        }
        StateCmd::Load { path } => {
            *engine = Engine::load(&path)?;
            Ok(format!("state loaded from {}\n", path.display()))
        }
    }
}

/// Loads the engine from `state_path` (when set and present), dispatches,
/// and saves back on success. Without a state path the session is ephemeral.
pub fn run_with_state(argv: &[String], state_path: Option<&Path>) -> CommandResult {
    let mut engine = match state_path {
        Some(path) if path.exists() => match Engine::load(path) {
            Ok(engine) => engine,
            Err(err) => {
                return CommandResult {
                    exit_code: 1,
                    stdout: String::new(),
                    stderr: format!("{}: {err}\n", err.name()),
                }
            }
        },
        _ => Engine::new(),
    };
    let result = dispatch(&mut engine, argv);
    if result.exit_code == 0 {
        if let Some(path) = state_path {
            if let Err(err) = engine.save(path) {
                return CommandResult {
                    exit_code: 1,
                    stdout: result.stdout,
                    stderr: format!("{}: {err}\n", err.name()),
                };
            }
        }
    }
    result
}
