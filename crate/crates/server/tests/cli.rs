use std::process::Command;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/coaching_session.json");
const USER_TURNS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/coaching_session_user.json");

#[test]
fn replay_prints_the_session_and_dashboard() {
    let dir = tempfile_dir();
    let store = dir.join("store.json");
    let out = Command::new(env!("CARGO_BIN_EXE_grow"))
        .args(["replay", "--script", FIXTURE, "--turns", USER_TURNS, "--store"])
        .arg(&store)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("coach [values_check_in]"));
    let json_start = stdout.find("\n{").unwrap();
    let dashboard: serde_json::Value = serde_json::from_str(&stdout[json_start..]).unwrap();
    assert_eq!(dashboard["overall_progress"], 43);
    assert_eq!(dashboard["display_phase"], "Active Coaching");

    let snapshot = std::fs::read_to_string(&store).unwrap();
    assert!(snapshot.contains("replay-user"));
    assert!(!snapshot.contains("Miya"));

    // reminders are off by default
    let out = Command::new(env!("CARGO_BIN_EXE_grow"))
        .args(["remind", "--script", FIXTURE, "--store"])
        .arg(&store)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn missing_model_configuration_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_grow"))
        .args(["remind"])
        .env_remove("GROW_LLM_API_KEY")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no model configured"));
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("grow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
