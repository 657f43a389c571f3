use std::thread;

use qloop_core::sandbox::{parse_result, run_script, RunSpec};

/// A pid counts as gone when /proc has no entry or only a zombie remains.
fn alive(pid: u32) -> bool {
    match std::fs::read_to_string(format!("/proc/{pid}/stat")) {
        Ok(stat) => {
            let state = stat.rsplit(')').next().and_then(|s| s.split_whitespace().next());
            state != Some("Z")
        }
        Err(_) => false,
    }
}

const SPAWNER: &str = "import subprocess, sys\np = subprocess.Popen(['sleep', '30'])\nprint(p.pid, flush=True)\n";

#[test]
fn descendants_killed_after_exit() {
    let r = run_script(&RunSpec::python(SPAWNER, 30.0)).unwrap();
    assert!(r.exit_status.success());
    let pid: u32 = r.stdout.trim().parse().unwrap();
    thread::sleep(std::time::Duration::from_millis(50));
    assert!(!alive(pid), "descendant {pid} survived");
}

#[test]
fn descendants_killed_on_timeout() {
    let script = format!("{SPAWNER}import time\ntime.sleep(30)\n");
    let r = run_script(&RunSpec::python(script, 1.0)).unwrap();
    assert!(r.timed_out);
    assert!(r.duration_s <= 1.0 + 2.0);
    let pid: u32 = r.stdout.trim().parse().unwrap();
    thread::sleep(std::time::Duration::from_millis(50));
    assert!(!alive(pid), "descendant {pid} survived");
}

#[test]
fn concurrent_runs_keep_streams_apart() {
    let handles: Vec<_> = ["alpha", "beta", "gamma", "delta"]
        .into_iter()
        .map(|tag| {
            thread::spawn(move || {
                let script = format!(
                    "import sys\nfor i in range(2000):\n    print('{tag}', i)\n    print('{tag}-err', i, file=sys.stderr)\nprint('RESULT: 1')\n"
                );
                (tag, run_script(&RunSpec::python(script, 60.0)).unwrap())
            })
        })
        .collect();
    for h in handles {
        let (tag, r) = h.join().unwrap();
        let lines: Vec<&str> = r.stdout.lines().collect();
        assert_eq!(lines.len(), 2001);
        for (i, l) in lines[..2000].iter().enumerate() {
            assert_eq!(*l, format!("{tag} {i}"));
        }
        assert!(r.stderr.lines().all(|l| l.starts_with(&format!("{tag}-err "))));
        assert_eq!(parse_result(&r.stdout, false), Ok(1.0));
    }
}

#[test]
fn streams_captured_on_failure() {
    let r = run_script(&RunSpec::python("import sys\nprint('out')\nprint('err', file=sys.stderr)\nsys.exit(3)\n", 30.0))
        .unwrap();
    assert_eq!(r.exit_status, qloop_core::sandbox::ExitStatus::Code(3));
    assert_eq!(r.stdout, "out\n");
    assert_eq!(r.stderr, "err\n");
}
