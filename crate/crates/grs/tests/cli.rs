use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

fn grs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grs"))
}

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn stdout(cmd: &mut Command) -> (i32, String, String) {
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn codebook_dump_head() {
    let (code, out, _) = stdout(grs().arg("dump-codebook"));
    assert_eq!(code, 0);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).take(4).map(|l| l.split('\t').take(3).collect()).collect();
    assert_eq!(
        rows,
        [["a", "97", "1100001"], ["b", "98", "1100010"], ["y", "121", "1111001"], ["z", "122", "1111010"]]
    );
}

#[test]
fn waveform_for_assigned_char() {
    let (code, out, _) = stdout(grs().args(["dump-waveform", "a"]));
    assert_eq!(code, 0);
    let levels: String =
        out.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split('\t').next_back().unwrap()).collect();
    assert_eq!(levels, "0100001101");
}

#[test]
fn waveform_for_unassigned_char_lists_alphabets() {
    let (code, _, err) = stdout(grs().args(["dump-waveform", "!"]));
    assert_eq!(code, 2);
    assert!(err.contains("not assigned"), "{err}");
    assert!(err.contains("commands: abcdefghijklmn\n"), "{err}");
    assert!(err.contains("status:   @OPQRSTUVYZ[\\]^`opqrstuvyz{|}~"), "{err}");
}

#[test]
fn shipped_map_matches_default() {
    let (_, default, _) = stdout(grs().arg("dump-map"));
    let (code, shipped, err) = stdout(grs().arg("dump-map").arg("--map").arg(repo("config/panel-1.map")));
    assert_eq!(code, 0, "{err}");
    assert_eq!(shipped, default);
}

#[test]
fn shipped_scenarios_pass() {
    for name in ["pump-overload.grs", "burner-start.grs"] {
        let (code, out, err) = stdout(
            grs().arg("scenario").arg(repo("scenarios").join(name)).arg("--config").arg(repo("config/grs.toml")),
        );
        assert_eq!(code, 0, "{name}\n{out}{err}");
        assert!(out.contains("0 failed"), "{out}");
    }
}

#[test]
fn failing_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.grs");
    std::fs::write(&path, "at 1 expect phase Heating\n").unwrap();
    let (code, out, _) = stdout(grs().arg("scenario").arg(&path));
    assert_eq!(code, 1);
    assert!(out.contains("FAIL line 1"), "{out}");
}

#[test]
fn scenario_writes_audit_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = stdout(
        grs().args(["run", "--scenario"]).arg(repo("scenarios/burner-start.grs")).arg("--log-dir").arg(dir.path()),
    );
    assert_eq!(code, 0, "{err}");
    let audit = std::fs::read_to_string(dir.path().join("audit.log")).unwrap();
    assert!(audit.lines().count() >= 4);
    let trace = std::fs::read_to_string(dir.path().join("trace.log")).unwrap();
    assert!(trace.lines().any(|l| l.contains(" down 0x61 'a' 0100001101 ok")), "{trace}");
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.toml");
    std::fs::write(&path, "bogus = 1\n").unwrap();
    let (code, _, err) = stdout(grs().args(["run", "--duration", "1s", "--config"]).arg(&path));
    assert_eq!(code, 2);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn hash_password_emits_loadable_record() {
    let mut child = grs()
        .args(["hash-password", "alice", "--iterations", "10", "--panels", "panel-1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"hunter2\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let line = String::from_utf8(out.stdout).unwrap();
    let store = grs::auth::CredentialStore::parse(&line).unwrap();
    assert!(store.verify("alice", "hunter2").is_some());
    assert!(store.verify("alice", "hunter3").is_none());
}
