//! End-to-end runs of the built binary.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_upss");
const PASS: &str = "open sesame";

struct Cli {
    conf: PathBuf,
}

impl Cli {
    fn new(dir: &Path) -> Self {
        let conf = dir.join("upss.conf");
        // Low iteration count: these tests reopen the vault constantly.
        std::fs::write(
            &conf,
            format!(
                "store = file:{}\nvault = {}\nvault_iters = 1000\n",
                dir.join("blocks").display(),
                dir.join("upss.vault").display(),
            ),
        )
        .unwrap();
        Cli { conf }
    }

    fn run_with_pass(&self, pass: &str, args: &[&str]) -> Output {
        Command::new(BIN)
            .arg("-c")
            .arg(&self.conf)
            .args(args)
            .env("UPSS_PASSPHRASE", pass)
            .output()
            .unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_with_pass(PASS, args)
    }

    /// Run, assert success, hand back stdout.
    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "`{}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).into_owned()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn init_then_walk_the_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let cli = Cli::new(tmp.path());

    cli.ok(&["init"]);
    assert_eq!(cli.ok(&["ls"]), "");

    // A second init must refuse to clobber the vault.
    let again = cli.run(&["init"]);
    assert_eq!(code(&again), 1);

    cli.ok(&["mkdir", "docs"]);
    cli.ok(&["touch", "docs/todo"]);
    cli.ok(&["touch", "docs/todo"]); // idempotent
    assert_eq!(cli.ok(&["ls"]), "docs/\n");
    assert_eq!(cli.ok(&["ls", "docs"]), "todo\n");

    let info = cli.ok(&["info", "docs/todo"]);
    assert!(info.contains("kind: file"), "{info}");
    assert!(info.contains("size: 0 bytes"), "{info}");
}

#[test]
fn store_and_get_by_path_and_by_pointer() {
    let tmp = tempfile::tempdir().unwrap();
    let cli = Cli::new(tmp.path());
    cli.ok(&["init"]);

    // Content crossing a block boundary, not valid UTF-8 throughout.
    let payload: Vec<u8> = (0..9000u32).map(|i| (i * 7 % 251) as u8).collect();
    let source = tmp.path().join("payload.bin");
    std::fs::write(&source, &payload).unwrap();

    cli.ok(&["store", source.to_str().unwrap(), "/data"]);

    let by_path = cli.run(&["get", "/data"]);
    assert_eq!(code(&by_path), 0);
    assert_eq!(by_path.stdout, payload);

    let pointer = cli.ok(&["name", "/data"]).trim().to_string();
    assert_eq!(pointer.len(), 170); // 85 bytes, hex

    let by_pointer = cli.run(&["get", &pointer]);
    assert_eq!(code(&by_pointer), 0);
    assert_eq!(by_pointer.stdout, payload);

    assert_eq!(cli.ok(&["get-path", &pointer]).trim(), "/data");

    // names lists the same pointer against the entry name
    let names = cli.ok(&["names", "/"]);
    assert!(names.contains(&pointer), "{names}");
    assert!(names.contains("data"), "{names}");
}

#[test]
fn appends_build_history() {
    let tmp = tempfile::tempdir().unwrap();
    let cli = Cli::new(tmp.path());
    cli.ok(&["init"]);

    let source = tmp.path().join("log.txt");
    std::fs::write(&source, "one\n").unwrap();
    cli.ok(&["store", source.to_str().unwrap(), "/log"]);
    cli.ok(&["append", "/log", "two\n"]);

    let extra = tmp.path().join("extra.txt");
    std::fs::write(&extra, "three\n").unwrap();
    cli.ok(&["append", "/log", "--from", extra.to_str().unwrap()]);

    let content = cli.run(&["get", "/log"]);
    assert_eq!(content.stdout, b"one\ntwo\nthree\n");

    let hist = cli.ok(&["history", "/log"]);
    let lines: Vec<&str> = hist.lines().collect();
    assert_eq!(lines.len(), 3, "{hist}");
    assert!(lines[0].starts_with("0:") && lines[0].ends_with("14 bytes"), "{hist}");
    assert!(lines[1].ends_with("8 bytes"), "{hist}");
    assert!(lines[2].ends_with("4 bytes"), "{hist}");

    let capped = cli.ok(&["history", "/log", "--depth", "1"]);
    assert!(capped.contains("not walked"), "{capped}");
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let cli = Cli::new(tmp.path());

    // No vault yet: domain error, but a usage-shaped one.
    assert_eq!(code(&cli.run(&["ls"])), 1);

    cli.ok(&["init"]);
    assert_eq!(code(&cli.run(&["ls", "missing"])), 2);
    assert_eq!(code(&cli.run(&["get", "/nope"])), 2);

    cli.ok(&["mkdir", "twice"]);
    assert_eq!(code(&cli.run(&["mkdir", "twice"])), 1);

    // Append with nothing to append is a usage error.
    cli.ok(&["touch", "f"]);
    assert_eq!(code(&cli.run(&["append", "f"])), 1);

    // Wrong passphrase cannot open the vault.
    let denied = cli.run_with_pass("not it", &["ls"]);
    assert_eq!(code(&denied), 3);

    // Unset passphrase is also an auth failure.
    let unset = Command::new(BIN)
        .arg("-c")
        .arg(&cli.conf)
        .arg("ls")
        .env_remove("UPSS_PASSPHRASE")
        .output()
        .unwrap();
    assert_eq!(code(&unset), 3);
}

struct ServeGuard(Child);

impl Drop for ServeGuard {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_server(conf: &Path, head: &Path) -> (ServeGuard, String) {
    let mut child = Command::new(BIN)
        .arg("-c")
        .arg(conf)
        .args(["serve", "127.0.0.1:0", "--uvc"])
        .arg(head)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected serve banner: {line:?}"))
        .to_string();
    (ServeGuard(child), addr)
}

#[test]
fn version_control_over_a_served_store() {
    let tmp = tempfile::tempdir().unwrap();
    let cli = Cli::new(tmp.path());
    let (_guard, addr) = spawn_server(&cli.conf, &tmp.path().join("head.uvc"));

    let wt_a = tmp.path().join("a");
    let wt_b = tmp.path().join("b");
    std::fs::create_dir(&wt_a).unwrap();
    std::fs::write(wt_a.join("a.txt"), "hello from a\n").unwrap();

    let a = |args: &[&str]| cli.run(args);

    // Attach, stage, push the first snapshot.
    assert_eq!(code(&a(&["uvc", "init", &addr, wt_a.to_str().unwrap()])), 0);
    assert_eq!(
        cli.ok(&["uvc", "head", wt_a.to_str().unwrap()]).trim(),
        "empty"
    );
    let staged = cli.ok(&["uvc", "add", wt_a.to_str().unwrap()]);
    assert!(staged.contains("1 added"), "{staged}");
    cli.ok(&["uvc", "push", wt_a.to_str().unwrap()]);

    // Clone sees the same bytes and no state file leakage.
    cli.ok(&["uvc", "clone", &addr, wt_b.to_str().unwrap()]);
    assert_eq!(
        std::fs::read_to_string(wt_b.join("a.txt")).unwrap(),
        "hello from a\n"
    );
    let head_a = cli.ok(&["uvc", "head", wt_a.to_str().unwrap()]);
    let head_b = cli.ok(&["uvc", "head", wt_b.to_str().unwrap()]);
    assert_eq!(head_a, head_b);

    // Writer a advances the head while b is working.
    std::fs::write(wt_a.join("c.txt"), "newcomer\n").unwrap();
    cli.ok(&["uvc", "add", wt_a.to_str().unwrap()]);
    cli.ok(&["uvc", "push", wt_a.to_str().unwrap()]);

    // Writer b races and loses, then restages and wins.
    std::fs::write(wt_b.join("b.txt"), "hello from b\n").unwrap();
    cli.ok(&["uvc", "add", wt_b.to_str().unwrap()]);
    let rejected = cli.run(&["uvc", "push", wt_b.to_str().unwrap()]);
    assert_eq!(code(&rejected), 2);
    assert!(
        String::from_utf8_lossy(&rejected.stderr).contains("rejected"),
        "{}",
        String::from_utf8_lossy(&rejected.stderr)
    );
    cli.ok(&["uvc", "add", wt_b.to_str().unwrap()]);
    cli.ok(&["uvc", "push", wt_b.to_str().unwrap()]);

    // Three accepted snapshots, oldest first.
    let log = cli.ok(&["uvc", "log", wt_a.to_str().unwrap()]);
    assert_eq!(log.lines().count(), 3, "{log}");

    // Pull brings b's file into a's tree without touching a's own files.
    cli.ok(&["uvc", "pull", wt_a.to_str().unwrap()]);
    assert_eq!(
        std::fs::read_to_string(wt_a.join("b.txt")).unwrap(),
        "hello from b\n"
    );
    assert_eq!(
        std::fs::read_to_string(wt_a.join("a.txt")).unwrap(),
        "hello from a\n"
    );
    assert_eq!(
        std::fs::read_to_string(wt_a.join("c.txt")).unwrap(),
        "newcomer\n"
    );

    // Both worktrees agree on the final head.
    assert_eq!(
        cli.ok(&["uvc", "head", wt_a.to_str().unwrap()]),
        cli.ok(&["uvc", "head", wt_b.to_str().unwrap()])
    );
}
