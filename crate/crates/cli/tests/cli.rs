use std::collections::BTreeMap;
use std::path::PathBuf;

use slicekit_cli::{dispatch, run_with_state, CommandResult};
use slicekit_core::tenancy::Share;
use slicekit_core::{Engine, MetricName};

fn corpus(name: &str) -> String {
    format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn args(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn run(engine: &mut Engine, parts: &[&str]) -> CommandResult {
    dispatch(engine, &args(parts))
}

fn ok(engine: &mut Engine, parts: &[&str]) -> String {
    let result = run(engine, parts);
    assert_eq!(result.exit_code, 0, "command {parts:?} failed: {}", result.stderr);
    result.stdout
}

/// A full session driven through the CLI: two VIMs, the reference package,
/// a slice through day-1, tenants and a UE.
fn cli_session(engine: &mut Engine) {
    ok(
        engine,
        &["vim", "create", "vim-cn", "8", "131072", "500", "10.0.1.0/24"],
    );
    ok(
        engine,
        &["vim", "create", "vim-ran", "8", "32768", "500", "10.0.2.0/24"],
    );
    ok(
        engine,
        &[
            "pkg",
            "onboard",
            &corpus("oai-epc.vnfd.nsdsl"),
            &corpus("srslte-enb.vnfd.nsdsl"),
            &corpus("oai-epc.nsd.nsdsl"),
            &corpus("srslte-enb.nsd.nsdsl"),
            &corpus("e2e-slice.nsid.nsdsl"),
        ],
    );
    ok(engine, &["slice", "create", "e2e-slice"]);
    ok(engine, &["slice", "day1", "slice-1"]);
    ok(engine, &["tenant", "mno", "A"]);
    ok(engine, &["tenant", "mvno", "A", "foo"]);
    ok(
        engine,
        &["tenant", "slice", "A", "foo", "s1", "0.6", "--instance", "slice-1"],
    );
    ok(engine, &["tenant", "attach", "ue-1", "A", "foo", "s1"]);
    ok(
        engine,
        &["metric", "record", "vim-cn/vm-1", "cpu_utilization_pct", "40", "33.9"],
    );
}

/// The same session issued directly against the engine API.
fn direct_session(engine: &mut Engine) {
    engine.create_vim("vim-cn", 8, 131072, 500, "10.0.1.0/24").unwrap();
    engine.create_vim("vim-ran", 8, 32768, 500, "10.0.2.0/24").unwrap();
    let texts: Vec<String> = [
        "oai-epc.vnfd.nsdsl",
        "srslte-enb.vnfd.nsdsl",
        "oai-epc.nsd.nsdsl",
        "srslte-enb.nsd.nsdsl",
        "e2e-slice.nsid.nsdsl",
    ]
    .iter()
    .map(|n| std::fs::read_to_string(corpus(n)).unwrap())
    .collect();
    engine.onboard_texts(&texts).unwrap();
    let slice = engine.create_slice("e2e-slice", &BTreeMap::new()).unwrap();
    engine.day1_configure(&slice).unwrap();
    engine.create_mno("A").unwrap();
    engine.create_mvno("A", "foo", Share::ONE).unwrap();
    engine
        .create_ran_slice("A", "foo", "s1", Share::parse("0.6").unwrap())
        .unwrap();
    engine.bind_instance("A", "foo", "s1", &slice).unwrap();
    engine.attach_ue("ue-1", "A", "foo", "s1").unwrap();
    engine
        .record_metric("vim-cn/vm-1", MetricName::CpuUtilizationPct, 40, 33.9)
        .unwrap();
}

#[test]
fn cli_is_a_thin_adapter_over_the_engine() {
    let mut via_cli = Engine::new();
    cli_session(&mut via_cli);
    let mut direct = Engine::new();
    direct_session(&mut direct);
    assert_eq!(via_cli, direct);
}

#[test]
fn slice_create_prints_id_and_five_vm_rows() {
    let mut engine = Engine::new();
    ok(
        &mut engine,
        &["vim", "create", "vim-cn", "8", "131072", "500", "10.0.1.0/24"],
    );
    ok(
        &mut engine,
        &["vim", "create", "vim-ran", "8", "32768", "500", "10.0.2.0/24"],
    );
    ok(
        &mut engine,
        &[
            "pkg",
            "onboard",
            &corpus("oai-epc.vnfd.nsdsl"),
            &corpus("srslte-enb.vnfd.nsdsl"),
            &corpus("oai-epc.nsd.nsdsl"),
            &corpus("srslte-enb.nsd.nsdsl"),
            &corpus("e2e-slice.nsid.nsdsl"),
        ],
    );
    let stdout = ok(
        &mut engine,
        &[
            "slice",
            "create",
            "e2e-slice",
            "--vim",
            "oai-epc-nsd=vim-cn",
            "--vim",
            "srslte-enb-nsd=vim-ran",
        ],
    );
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("slice-1 (e2e-slice)"), "{stdout}");
    assert_eq!(lines.len(), 6, "{stdout}");
    let vm_lines = &lines[1..];
    for (line, vdu) in vm_lines.iter().zip(["hss", "mme", "spgw-c", "spgw-u", "enb"]) {
        assert!(line.contains(&format!("vdu={vdu}")), "{line}");
    }
    assert_eq!(vm_lines.iter().filter(|l| l.contains("vim=vim-cn")).count(), 4);
    assert_eq!(vm_lines.iter().filter(|l| l.contains("vim=vim-ran")).count(), 1);
}

#[test]
fn second_day1_exits_one_with_invalid_state() {
    let mut engine = Engine::new();
    cli_session(&mut engine);
    let result = run(&mut engine, &["slice", "day1", "slice-1"]);
    assert_eq!(result.exit_code, 1);
    assert!(result.stderr.starts_with("InvalidState:"), "{}", result.stderr);
}

#[test]
fn unknown_subcommand_exits_two() {
    let mut engine = Engine::new();
    assert_eq!(run(&mut engine, &["frobnicate"]).exit_code, 2);
    assert_eq!(run(&mut engine, &["vim", "explode"]).exit_code, 2);
    assert_eq!(run(&mut engine, &["slice", "create"]).exit_code, 2);
}

#[test]
fn validate_of_broken_package_exits_one_and_prints_finding() {
    let mut engine = Engine::new();
    let result = run(
        &mut engine,
        &[
            "pkg",
            "validate",
            &corpus("oai-epc.vnfd.nsdsl"),
            &corpus("oai-epc.nsd.nsdsl"),
            &corpus("srslte-enb.nsd.nsdsl"),
            &corpus("e2e-slice.nsid.nsdsl"),
        ],
    );
    assert_eq!(result.exit_code, 1);
    assert!(
        result.stdout.contains("constituent vnfd `srslte-enb` not found"),
        "{}",
        result.stdout
    );
    assert!(result.stderr.starts_with("ValidationFailed:"), "{}", result.stderr);
}

#[test]
fn lines_format_outputs_documented_grammars() {
    let mut engine = Engine::new();
    cli_session(&mut engine);
    // Ledger history: `<ts> <event> <vm-id> <vcpus> <memory-mb> <storage-gb>`.
    let history = ok(&mut engine, &["vim", "usage", "vim-cn", "--format", "lines"]);
    for line in history.lines() {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 6, "{line}");
        fields[0].parse::<u64>().unwrap();
        assert!(fields[1] == "alloc" || fields[1] == "release");
        fields[3].parse::<u64>().unwrap();
        fields[4].parse::<u64>().unwrap();
        fields[5].parse::<u64>().unwrap();
    }
    // Fabric export: `<slice-id> <tag> <vm-a> <vm-b>`.
    let fabric = ok(&mut engine, &["fabric", "report", "--format", "lines"]);
    assert_eq!(fabric.lines().count(), 4);
    for line in fabric.lines() {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 4, "{line}");
        assert_eq!(fields[0], "slice-1");
        assert_eq!(fields[1], "100");
    }
    // Metric query CSV with its one-line header.
    let csv = ok(
        &mut engine,
        &["metric", "query", "vim-cn/vm-1", "cpu_utilization_pct", "0", "100"],
    );
    assert_eq!(csv, "vm_id,metric,ts,value\nvim-cn/vm-1,cpu_utilization_pct,40,33.9\n");
}

#[test]
fn event_lines_mode_reports_what_a_command_did() {
    let mut engine = Engine::new();
    ok(
        &mut engine,
        &["vim", "create", "vim-cn", "8", "131072", "500", "10.0.1.0/24"],
    );
    ok(
        &mut engine,
        &["vim", "create", "vim-ran", "8", "32768", "500", "10.0.2.0/24"],
    );
    ok(
        &mut engine,
        &[
            "pkg",
            "onboard",
            &corpus("oai-epc.vnfd.nsdsl"),
            &corpus("srslte-enb.vnfd.nsdsl"),
            &corpus("oai-epc.nsd.nsdsl"),
            &corpus("srslte-enb.nsd.nsdsl"),
            &corpus("e2e-slice.nsid.nsdsl"),
        ],
    );
    let stdout = ok(&mut engine, &["slice", "create", "e2e-slice", "--format", "lines"]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines.first().copied(),
        Some("4 slice-1 transition Onboarded->Instantiating")
    );
    assert_eq!(
        lines.last().copied(),
        Some("4 slice-1 transition Instantiating->Day0Done")
    );
    assert_eq!(lines.iter().filter(|l| l.contains(" vm-allocated ")).count(), 5);
    assert_eq!(lines.iter().filter(|l| l.contains(" ns-created ")).count(), 2);
    assert_eq!(lines.iter().filter(|l| l.contains(" chain-linked ")).count(), 1);
}

#[test]
fn prb_allocate_matches_engine_numbers() {
    let mut engine = Engine::new();
    ok(&mut engine, &["tenant", "mno", "A"]);
    ok(&mut engine, &["tenant", "mvno", "A", "foo"]);
    ok(&mut engine, &["tenant", "slice", "A", "foo", "a", "0.6"]);
    ok(&mut engine, &["tenant", "slice", "A", "foo", "b", "0.4"]);
    let stdout = ok(
        &mut engine,
        &["prb", "allocate", "A", "100", "a=100", "b=100", "--format", "lines"],
    );
    assert_eq!(stdout, "a 60\nb 40\n");
}

#[test]
fn state_env_var_persists_between_invocations() {
    let dir = std::env::temp_dir().join(format!("slicekit-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let state: PathBuf = dir.join("session.slk");
    let _ = std::fs::remove_file(&state);

    let r1 = run_with_state(
        &args(&["vim", "create", "vim-a", "4", "8192", "100", "10.1.0.0/24"]),
        Some(&state),
    );
    assert_eq!(r1.exit_code, 0, "{}", r1.stderr);
    assert!(state.exists());

    let r2 = run_with_state(&args(&["vim", "list", "--format", "lines"]), Some(&state));
    assert_eq!(r2.exit_code, 0);
    assert!(
        r2.stdout.starts_with("vim-a 0 4 0 8192 0 100 10.1.0.0/24"),
        "{}",
        r2.stdout
    );

    // A failing command must not clobber the snapshot.
    let before = std::fs::read(&state).unwrap();
    let r3 = run_with_state(
        &args(&["vim", "create", "vim-a", "4", "8192", "100", "10.1.0.0/24"]),
        Some(&state),
    );
    assert_eq!(r3.exit_code, 1);
    assert!(r3.stderr.starts_with("DuplicateVim:"), "{}", r3.stderr);
    assert_eq!(std::fs::read(&state).unwrap(), before);

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn state_save_and_load_subcommands_round_trip() {
    let dir = std::env::temp_dir().join(format!("slicekit-save-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("explicit.slk");

    let mut engine = Engine::new();
    cli_session(&mut engine);
    ok(&mut engine, &["state", "save", path.to_str().unwrap()]);

    let mut other = Engine::new();
    ok(&mut other, &["state", "load", path.to_str().unwrap()]);
    // Loading replaces the whole session, so both engines now agree.
    assert_eq!(other.vim_usage("vim-cn").unwrap(), engine.vim_usage("vim-cn").unwrap());
    assert_eq!(other.events().len(), engine.events().len());

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn binary_respects_state_env_and_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_slicekit");
    let dir = std::env::temp_dir().join(format!("slicekit-bin-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let state = dir.join("bin-session.slk");
    let run = |args: &[&str]| {
        std::process::Command::new(exe)
            .args(args)
            .env("SLICEKIT_STATE", &state)
            .output()
            .expect("spawn slicekit")
    };

    let out = run(&["vim", "create", "vim-x", "4", "8192", "100", "10.2.0.0/24"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // Second process sees the persisted VIM.
    let out = run(&["vim", "list", "--format", "lines"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "vim-x 0 4 0 8192 0 100 10.2.0.0/24\n"
    );

    // Domain error: exit 1, name on stderr, stdout empty.
    let out = run(&["vim", "usage", "ghost"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("UnknownVim:"));

    // Usage error: exit 2.
    let out = run(&["vim", "implode"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn scenario_run_over_ns_instances() {
    let mut engine = Engine::new();
    ok(
        &mut engine,
        &["vim", "create", "vim-a", "8", "32768", "100", "10.0.1.0/24"],
    );
    ok(
        &mut engine,
        &["vim", "create", "vim-b", "8", "32768", "100", "10.0.2.0/24"],
    );
    ok(
        &mut engine,
        &[
            "pkg",
            "onboard",
            &corpus("filexfer.vnfd.nsdsl"),
            &corpus("filexfer.nsd.nsdsl"),
            &corpus("filexfer.nsid.nsdsl"),
        ],
    );
    ok(&mut engine, &["ns", "create", "filexfer-nsd", "vim-a"]);
    ok(&mut engine, &["ns", "create", "filexfer-nsd", "vim-b"]);
    let stdout = ok(
        &mut engine,
        &[
            "scenario",
            "run",
            &corpus("two-vm-transfer.scenario"),
            "--format",
            "lines",
        ],
    );
    assert_eq!(stdout, "vim-a/vm-1 80\nvim-b/vm-1 160\n");
    let summary = ok(
        &mut engine,
        &[
            "metric",
            "summarize",
            "vim-b/vm-1",
            "cpu_utilization_pct",
            "--format",
            "lines",
        ],
    );
    assert!(summary.starts_with("vim-b/vm-1 cpu_utilization_pct 36.2 "), "{summary}");
}
