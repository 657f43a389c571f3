//! Runs generated solver scripts in a throwaway directory with a wall-clock
//! timeout, an address-space cap, a scrubbed environment and, where the
//! kernel permits, a private network namespace.
//!
//! The child leads its own process group; the whole group is killed when the
//! run ends, whether by exit or by timeout.

use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::LazyLock;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// File name of the script inside the run directory.
pub const SCRIPT_NAME: &str = "solver.py";
pub const DEFAULT_MEMORY_CAP: u64 = 8 << 30;
pub const DEFAULT_ENV_ALLOWLIST: &[&str] =
    &["PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH", "VIRTUAL_ENV", "CONDA_PREFIX", "OMP_NUM_THREADS"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub script: String,
    /// Program and leading arguments; the script path is appended.
    pub interpreter: Vec<String>,
    pub timeout_s: f64,
    /// Address-space limit in bytes; `None` leaves the inherited limit.
    pub memory_cap: Option<u64>,
    /// Variables copied from the parent environment; everything else is dropped.
    pub env_allowlist: Vec<String>,
    pub isolate_network: bool,
}

impl RunSpec {
    pub fn python(script: impl Into<String>, timeout_s: f64) -> Self {
        Self {
            script: script.into(),
            interpreter: vec!["python3".into()],
            timeout_s,
            memory_cap: Some(DEFAULT_MEMORY_CAP),
            env_allowlist: DEFAULT_ENV_ALLOWLIST.iter().map(|s| s.to_string()).collect(),
            isolate_network: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Code(i32),
    /// Terminated by a signal, including our own kill on timeout.
    Killed(i32),
}

impl ExitStatus {
    pub fn success(self) -> bool {
        self == ExitStatus::Code(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub exit_status: ExitStatus,
    pub stdout: String,
    pub stderr: String,
    pub duration_s: f64,
    pub timed_out: bool,
}

impl ExecutionResult {
    /// Exited with status 0 within the time limit.
    pub fn clean(&self) -> bool {
        !self.timed_out && self.exit_status.success()
    }
}

/// Failures of the runner itself, as opposed to failures of the script.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SandboxError {
    #[error("interpreter {0:?} not found")]
    InterpreterMissing(String),
    #[error("invalid run spec: {0}")]
    InvalidSpec(String),
    #[error("sandbox I/O: {0}")]
    Io(String),
}

fn io_err(e: std::io::Error) -> SandboxError {
    SandboxError::Io(e.to_string())
}

static NETNS_WARNED: AtomicBool = AtomicBool::new(false);

fn spawn_reader<R: Read + Send + 'static>(mut r: R) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

/// Executes `spec.script` and returns once the process group is gone.
pub fn run_script(spec: &RunSpec) -> Result<ExecutionResult, SandboxError> {
    if !(spec.timeout_s > 0.0 && spec.timeout_s.is_finite()) {
        return Err(SandboxError::InvalidSpec(format!("timeout_s must be positive, got {}", spec.timeout_s)));
    }
    let Some((program, args)) = spec.interpreter.split_first() else {
        return Err(SandboxError::InvalidSpec("empty interpreter command".into()));
    };
    let dir = tempfile::Builder::new().prefix("qloop-run-").tempdir().map_err(io_err)?;
    std::fs::write(dir.path().join(SCRIPT_NAME), &spec.script).map_err(io_err)?;

    let mut cmd = Command::new(program);
    cmd.args(args)
        .arg(SCRIPT_NAME)
        .current_dir(dir.path())
        .env_clear()
        .envs(spec.env_allowlist.iter().filter_map(|k| std::env::var_os(k).map(|v| (k, v))))
        .env("TMPDIR", dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let memory_cap = spec.memory_cap;
    let isolate = spec.isolate_network;
    // SAFETY: only async-signal-safe syscalls run between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            if let Some(cap) = memory_cap {
                let lim = libc::rlimit { rlim_cur: cap as libc::rlim_t, rlim_max: cap as libc::rlim_t };
                if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
            }
            if isolate
                && libc::unshare(libc::CLONE_NEWNET) != 0
                && libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) != 0
            {
                // Reported through a marker at the start of stderr.
                libc::write(2, NETNS_MARKER.as_ptr().cast(), NETNS_MARKER.len());
            }
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => SandboxError::InterpreterMissing(program.clone()),
        _ => io_err(e),
    })?;
    let pgid = child.id() as libc::pid_t;
    let out = spawn_reader(child.stdout.take().expect("piped"));
    let err = spawn_reader(child.stderr.take().expect("piped"));

    let deadline = Duration::from_secs_f64(spec.timeout_s);
    let mut timed_out = false;
    let status = loop {
        if let Some(s) = child.try_wait().map_err(io_err)? {
            break s;
        }
        if start.elapsed() >= deadline {
            timed_out = true;
            // SAFETY: plain syscall on the group we created.
            unsafe { libc::killpg(pgid, libc::SIGKILL) };
            break child.wait().map_err(io_err)?;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let duration_s = start.elapsed().as_secs_f64();
    // Descendants that outlived the leader would otherwise hold the pipes open.
    // SAFETY: as above; ESRCH when the group is already empty is harmless.
    unsafe { libc::killpg(pgid, libc::SIGKILL) };

    let scrub = |bytes: Vec<u8>| relativize(String::from_utf8_lossy(&bytes).into_owned(), dir.path());
    let stdout = scrub(out.join().unwrap_or_default());
    let mut stderr = scrub(err.join().unwrap_or_default());
    if let Some(rest) = stderr.strip_prefix(NETNS_MARKER) {
        if !NETNS_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("network namespaces unavailable; solver scripts keep network access");
        }
        stderr = rest.to_string();
    }
    let exit_status = match (status.code(), status.signal()) {
        (Some(c), _) => ExitStatus::Code(c),
        (None, Some(s)) => ExitStatus::Killed(s),
        (None, None) => ExitStatus::Killed(0),
    };
    Ok(ExecutionResult { exit_status, stdout, stderr, duration_s, timed_out })
}

/// Rewrites absolute paths into the run directory as `./...` so captured
/// tracebacks do not depend on the temporary directory name.
fn relativize(text: String, dir: &std::path::Path) -> String {
    let mut out = text;
    let canonical = dir.canonicalize().ok();
    for d in [Some(dir.to_path_buf()), canonical].into_iter().flatten() {
        let prefix = d.to_string_lossy().into_owned();
        if !prefix.is_empty() && out.contains(&prefix) {
            out = out.replace(&prefix, ".");
        }
    }
    out
}

const NETNS_MARKER: &str = "\u{1}qloop-netns-unavailable\u{1}\n";

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    #[error("no RESULT line")]
    NoResultLine,
    #[error("RESULT value {0:?} is not a number")]
    Malformed(String),
    #[error("RESULT value {0:?} is not finite")]
    NonFinite(String),
}

static RESULT_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*RESULT:\s*(.*?)\s*$").unwrap());
static FLOAT_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").unwrap());

fn to_finite(token: &str) -> Result<f64, ParseFailure> {
    let v: f64 = token.parse().map_err(|_| ParseFailure::Malformed(token.to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ParseFailure::NonFinite(token.to_string()))
    }
}

/// Value of the last `RESULT: <float>` line. In lenient mode a stdout with
/// no such line falls back to its last numeric token.
pub fn parse_result(stdout: &str, lenient: bool) -> Result<f64, ParseFailure> {
    if let Some(c) = stdout.lines().rev().find_map(|l| RESULT_LINE.captures(l)) {
        return to_finite(&c[1]);
    }
    if lenient {
        if let Some(m) = FLOAT_TOKEN.find_iter(stdout).last() {
            return to_finite(m.as_str());
        }
    }
    Err(ParseFailure::NoResultLine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn py(script: &str, timeout: f64) -> ExecutionResult {
        run_script(&RunSpec::python(script, timeout)).unwrap()
    }

    #[test]
    fn prints_result() {
        let r = py("print('RESULT: 1.5')\n", 30.0);
        assert_eq!(r.exit_status, ExitStatus::Code(0));
        assert!(r.stdout.contains("RESULT: 1.5"));
        assert!(!r.timed_out);
        assert_eq!(parse_result(&r.stdout, false), Ok(1.5));
    }

    #[test]
    fn timeout_kills() {
        let r = py("import time\ntime.sleep(10)\n", 1.0);
        assert!(r.timed_out);
        assert_eq!(r.exit_status, ExitStatus::Killed(libc::SIGKILL));
        assert!(r.duration_s >= 1.0 && r.duration_s < 3.0, "{}", r.duration_s);
    }

    #[test]
    fn exception_traceback() {
        let r = py("print('partial')\nraise ValueError('boom')\n", 30.0);
        assert_eq!(r.exit_status, ExitStatus::Code(1));
        assert!(r.stderr.contains("Traceback"));
        assert!(r.stderr.contains("ValueError: boom"));
        assert!(r.stderr.contains("File \"./solver.py\", line 2"), "{}", r.stderr);
        assert_eq!(r.stdout, "partial\n");
    }

    #[test]
    fn interpreter_missing() {
        let mut spec = RunSpec::python("", 1.0);
        spec.interpreter = vec!["qloop-no-such-interpreter".into()];
        assert_eq!(run_script(&spec), Err(SandboxError::InterpreterMissing("qloop-no-such-interpreter".into())));
    }

    #[test]
    fn environment_scrubbed() {
        std::env::set_var("QLOOP_SECRET_FOR_TEST", "x");
        let r = py("import os\nprint('QLOOP_SECRET_FOR_TEST' in os.environ, os.getcwd() == os.environ['TMPDIR'])\n", 30.0);
        assert_eq!(r.stdout.trim(), "False True");
    }

    #[test]
    fn memory_cap_applies() {
        let mut spec = RunSpec::python("x = bytearray(512 * 1024 * 1024)\nprint('allocated')\n", 30.0);
        spec.memory_cap = Some(256 << 20);
        let r = run_script(&spec).unwrap();
        assert!(!r.exit_status.success());
        assert!(r.stderr.contains("MemoryError"), "{}", r.stderr);
    }

    #[test]
    fn parse_contract() {
        assert_eq!(parse_result("noise\nRESULT: -2.2360680\n", false), Ok(-2.236068));
        assert_eq!(parse_result("RESULT: 1.0\nRESULT: 2.0", false), Ok(2.0));
        assert_eq!(parse_result("final energy is minus two", false), Err(ParseFailure::NoResultLine));
        assert_eq!(parse_result("final energy is minus two", false).unwrap_err().to_string(), "no RESULT line");
        assert_eq!(parse_result("RESULT: nan", false), Err(ParseFailure::NonFinite("nan".into())));
        assert_eq!(parse_result("RESULT: abc", false), Err(ParseFailure::Malformed("abc".into())));
        assert_eq!(parse_result("energy = -1.25 Ha\n", true), Ok(-1.25));
        assert_eq!(parse_result("energy = -1.25e1 Ha\n", false), Err(ParseFailure::NoResultLine));
        assert_eq!(parse_result("RESULT: 3\nlast 7", true), Ok(3.0));
    }
}
