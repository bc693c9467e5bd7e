use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use super::{SatBackend, SatStatus, SmtError};

/// Runs an external SMT-LIB 2 solver reading the script on stdin, one process per check.
#[derive(Debug, Clone)]
pub struct ProcessSolver {
    program: String,
    args: Vec<String>,
}

impl ProcessSolver {
    /// `cmd` is split on whitespace, e.g. `"z3 -in"`.
    pub fn new(cmd: &str) -> Result<Self, SmtError> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| SmtError::SolverCrash("empty solver command".into()))?;
        Ok(ProcessSolver {
            program,
            args: parts.collect(),
        })
    }
}

fn parse_status(output: &str) -> Result<SatStatus, SmtError> {
    match output.lines().map(str::trim).find(|l| !l.is_empty()) {
        Some("sat") => Ok(SatStatus::Sat),
        Some("unsat") => Ok(SatStatus::Unsat),
        Some("unknown" | "timeout") => Ok(SatStatus::Unknown),
        Some(other) => Err(SmtError::SolverCrash(format!("unexpected solver output: {other}"))),
        None => Err(SmtError::SolverCrash("solver produced no output".into())),
    }
}

impl SatBackend for ProcessSolver {
    fn check(&self, script: &str, budget_ms: u64) -> Result<SatStatus, SmtError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SmtError::SolverCrash(format!("cannot start `{}`: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut s = String::new();
            let r = stdout.read_to_string(&mut s).map(|_| s);
            let _ = tx.send(r);
        });
        if let Err(e) = stdin.write_all(script.as_bytes()) {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SmtError::SolverCrash(format!("writing to solver: {e}")));
        }
        drop(stdin);
        match rx.recv_timeout(Duration::from_millis(budget_ms)) {
            Ok(Ok(out)) => {
                let _ = child.wait();
                parse_status(&out)
            }
            Ok(Err(e)) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(SmtError::SolverCrash(format!("reading solver output: {e}")))
            }
            Err(_) => {
                log::debug!("solver exceeded {budget_ms} ms; killing");
                let _ = child.kill();
                let _ = child.wait();
                Ok(SatStatus::Unknown)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_lines() {
        assert_eq!(parse_status("\nsat\n").unwrap(), SatStatus::Sat);
        assert_eq!(parse_status("unsat").unwrap(), SatStatus::Unsat);
        assert_eq!(parse_status("unknown").unwrap(), SatStatus::Unknown);
        assert!(parse_status("(error \"line 1\")").is_err());
        assert!(parse_status("").is_err());
    }

    #[test]
    fn missing_binary_is_a_crash() {
        let s = ProcessSolver::new("definitely-not-a-solver-binary").unwrap();
        assert!(matches!(s.check("(check-sat)", 1000), Err(SmtError::SolverCrash(_))));
    }
}
