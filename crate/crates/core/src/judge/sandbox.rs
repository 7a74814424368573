//! Child-process execution with a scrubbed environment, a fresh working
//! directory and a wall-clock limit enforced on the whole process group.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Component, Path};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::config::ExecLimits;
use crate::corpus::SubjectLanguage;
use crate::domain::{AuxFile, TestCase};

use super::{ExecutionResult, ExitState};

const GUARD_SOURCE: &str = include_str!("guard.py");
const MAX_CAPTURE: usize = 1 << 20;
const POLL: Duration = Duration::from_millis(5);

fn safe_relative(path: &str) -> bool {
    let p = Path::new(path);
    !p.is_absolute() && p.components().all(|c| matches!(c, Component::Normal(_)))
}

fn stage(work: &Path, file_name: &str, source: &str, aux: &[AuxFile]) -> io::Result<()> {
    fs::create_dir_all(work)?;
    for file in aux {
        if !safe_relative(&file.relative_path) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("aux path escapes sandbox: {}", file.relative_path),
            ));
        }
        let dest = work.join(&file.relative_path);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(dest, &file.contents)?;
    }
    fs::write(work.join(file_name), source)
}

fn capture<R: Read + Send + 'static>(mut reader: R) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = MAX_CAPTURE.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        kept
    })
}

#[cfg(unix)]
fn configure(cmd: &mut Command, limits: &ExecLimits) {
    use std::os::unix::process::CommandExt;
    let memory_cap = limits.memory_cap;
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            let no_core = libc::rlimit {
                rlim_cur: 0,
                rlim_max: 0,
            };
            libc::setrlimit(libc::RLIMIT_CORE, &no_core);
            if memory_cap > 0 {
                let cap = libc::rlimit {
                    rlim_cur: memory_cap as libc::rlim_t,
                    rlim_max: memory_cap as libc::rlim_t,
                };
                libc::setrlimit(libc::RLIMIT_AS, &cap);
            }
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn configure(_cmd: &mut Command, _limits: &ExecLimits) {}

#[cfg(unix)]
fn kill_group(child: &Child) {
    // The child is its own process group leader, so its pid names the group.
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(_child: &Child) {}

/// Waits until the child exits or the limit passes, without reaping it, so
/// the process group id stays reserved until the group is killed.
#[cfg(unix)]
fn exited_unreaped(child: &Child) -> io::Result<bool> {
    let mut info: libc::siginfo_t = unsafe { std::mem::zeroed() };
    let rc = unsafe {
        libc::waitid(
            libc::P_PID,
            child.id() as libc::id_t,
            &mut info,
            libc::WEXITED | libc::WNOHANG | libc::WNOWAIT,
        )
    };
    if rc != 0 {
        return Err(io::Error::last_os_error());
    }
    Ok(unsafe { info.si_pid() } != 0)
}

#[cfg(not(unix))]
fn exited_unreaped(child: &mut Child) -> io::Result<bool> {
    child.try_wait().map(|s| s.is_some())
}

fn wait_with_deadline(child: &mut Child, limit: Duration) -> io::Result<bool> {
    let deadline = Instant::now() + limit;
    loop {
        if exited_unreaped(child)? {
            return Ok(true);
        }
        if Instant::now() >= deadline {
            return Ok(false);
        }
        thread::sleep(POLL);
    }
}

fn spawn_error(case: &TestCase, message: String, started: Instant) -> ExecutionResult {
    ExecutionResult {
        case_id: case.case_id.clone(),
        stdout: String::new(),
        stderr: message,
        exit_status: ExitState::SpawnError,
        exit_code: None,
        wall_time: started.elapsed(),
    }
}

pub(super) fn execute(
    language: &SubjectLanguage,
    source: &str,
    case: &TestCase,
    aux: &[AuxFile],
    limits: &ExecLimits,
) -> ExecutionResult {
    let started = Instant::now();
    let sandbox = match tempfile::Builder::new().prefix("hintgate-").tempdir() {
        Ok(dir) => dir,
        Err(e) => return spawn_error(case, format!("cannot create sandbox: {e}"), started),
    };
    let work = sandbox.path().join("work");
    let file_name = format!("solution.{}", language.extension);
    if let Err(e) = stage(&work, &file_name, source, aux) {
        return spawn_error(case, format!("cannot stage program: {e}"), started);
    }

    let Some((program, leading)) = language.interpreter.split_first() else {
        return spawn_error(case, "no interpreter configured".into(), started);
    };
    let mut cmd = Command::new(program);
    cmd.args(leading);
    if language.is_python() {
        let guard = sandbox.path().join("guard.py");
        if let Err(e) = fs::write(&guard, GUARD_SOURCE) {
            return spawn_error(case, format!("cannot stage guard: {e}"), started);
        }
        cmd.arg("-I").arg("-B").arg(&guard);
    }
    cmd.arg(&file_name);
    if let Some(args) = &case.argv {
        cmd.args(args);
    }
    cmd.current_dir(&work)
        .env_clear()
        .env("PATH", "/usr/local/bin:/usr/bin:/bin")
        .env("LANG", "C.UTF-8")
        .env("LC_ALL", "C.UTF-8")
        .env("HOME", &work)
        .env("OPENBLAS_NUM_THREADS", "1")
        .env("OMP_NUM_THREADS", "1")
        .env("MPLBACKEND", "Agg")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    configure(&mut cmd, limits);

    let mut child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) => return spawn_error(case, format!("cannot start `{program}`: {e}"), started),
    };

    let input = case.stdin.clone().unwrap_or_default();
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let out = capture(child.stdout.take().expect("piped stdout"));
    let err = capture(child.stderr.take().expect("piped stderr"));

    let finished = wait_with_deadline(&mut child, limits.wall_time());
    kill_group(&child);
    let status = child.wait();
    let (exit_status, exit_code) = match (finished, status) {
        (Ok(true), Ok(status)) if status.success() => (ExitState::Ok, Some(0)),
        (Ok(true), Ok(status)) => (ExitState::NonzeroExit, status.code()),
        (Ok(false), _) => (ExitState::Timeout, None),
        _ => (ExitState::NonzeroExit, None),
    };
    let _ = writer.join();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let wall_time = started.elapsed();

    let work_str = work.to_string_lossy().into_owned();
    let clean = |bytes: Vec<u8>| String::from_utf8_lossy(&bytes).replace(&work_str, ".");
    ExecutionResult {
        case_id: case.case_id.clone(),
        stdout: clean(stdout),
        stderr: clean(stderr),
        exit_status,
        exit_code,
        wall_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_escaping_aux_paths() {
        assert!(safe_relative("data/a.txt"));
        assert!(!safe_relative("../a.txt"));
        assert!(!safe_relative("/etc/passwd"));
    }
}
