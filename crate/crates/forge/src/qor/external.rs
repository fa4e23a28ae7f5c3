//! Adapter that hands a design to an external synthesis tool.
//!
//! Each evaluation gets a private work directory holding the annotated
//! sources and a driver script; the adapter command (a shell template) is
//! expected to leave a report file behind, which is then parsed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::analyzer::KernelInfo;
use crate::pragma::PragmaConfig;
use crate::qor::{parse_report, Evaluator, PartSpec, QoRError, QoRReport};
use crate::source::SourceUnit;

const REPORT_FILE: &str = "csynth.xml";
const POLL_INTERVAL: Duration = Duration::from_millis(25);

/// Runs one shell command per design. The template may use `{workdir}`,
/// `{report}`, and `{part}` placeholders; the command must write the
/// report to `{report}`.
pub struct ExternalBackend {
    root: PathBuf,
    template: String,
    timeout: Duration,
    next_id: AtomicU64,
}

impl ExternalBackend {
    pub fn new(root: impl Into<PathBuf>, template: impl Into<String>) -> Self {
        Self {
            root: root.into(),
            template: template.into(),
            timeout: Duration::from_secs(600),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn io_err(what: &str, path: &Path, e: std::io::Error) -> QoRError {
        QoRError::BackendUnavailable(format!("{what} {}: {e}", path.display()))
    }
}

impl Evaluator for ExternalBackend {
    fn evaluate(
        &self,
        unit: &SourceUnit,
        info: &KernelInfo,
        config: &PragmaConfig,
        part: &PartSpec,
    ) -> Result<QoRReport, QoRError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let workdir = self.root.join(format!("eval_{id:06}"));
        fs::create_dir_all(&workdir).map_err(|e| Self::io_err("creating", &workdir, e))?;
        for f in unit.files() {
            let path = workdir.join(&f.name);
            fs::write(&path, &f.content).map_err(|e| Self::io_err("writing", &path, e))?;
        }
        let script = workdir.join("synth.tcl");
        fs::write(&script, driver_script(unit, info, config, part))
            .map_err(|e| Self::io_err("writing", &script, e))?;

        let report_path = workdir.join(REPORT_FILE);
        let command = self
            .template
            .replace("{workdir}", &workdir.to_string_lossy())
            .replace("{report}", &report_path.to_string_lossy())
            .replace("{part}", &part.name);

        let stdout = fs::File::create(workdir.join("adapter.stdout"))
            .map_err(|e| Self::io_err("creating log in", &workdir, e))?;
        let stderr = fs::File::create(workdir.join("adapter.stderr"))
            .map_err(|e| Self::io_err("creating log in", &workdir, e))?;
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .current_dir(&workdir)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn()
            .map_err(|e| QoRError::BackendUnavailable(format!("spawning adapter: {e}")))?;

        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if started.elapsed() >= self.timeout {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Ok(QoRReport::failed("timeout"));
                    }
                    std::thread::sleep(POLL_INTERVAL);
                }
                Err(e) => {
                    return Err(QoRError::BackendUnavailable(format!(
                        "waiting for adapter: {e}"
                    )))
                }
            }
        };

        if !report_path.exists() {
            return Err(QoRError::BackendUnavailable(format!(
                "adapter exited with {status} and produced no {REPORT_FILE}"
            )));
        }
        let text = fs::read_to_string(&report_path)
            .map_err(|e| Self::io_err("reading", &report_path, e))?;
        parse_report(&text)
    }
}

/// A conventional batch-synthesis driver the adapter may source. Kept
/// regenerated per design so a human can rerun any evaluation by hand.
fn driver_script(
    unit: &SourceUnit,
    info: &KernelInfo,
    config: &PragmaConfig,
    part: &PartSpec,
) -> String {
    let mut s = String::new();
    s.push_str(&format!("# design: {}\n", config.canonical_text()));
    s.push_str("open_project -reset proj\n");
    s.push_str(&format!("set_top {}\n", info.top_function));
    for f in unit.files() {
        s.push_str(&format!("add_files {}\n", f.name));
    }
    s.push_str("open_solution -reset sol\n");
    s.push_str(&format!("set_part {{{}}}\n", part.name));
    s.push_str(&format!("create_clock -period {}\n", part.clock_ns));
    s.push_str("csynth_design\nexit\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::analyze;
    use crate::pragma::{enumerate_sites, PragmaConfig};
    use crate::qor::{default_catalog, render_report, QoRReport, ReportStatus};

    fn toy() -> (SourceUnit, KernelInfo, PragmaConfig) {
        let unit = SourceUnit::single(
            "k.c",
            "void top(int a[4]) {\n    for (int i = 0; i < 4; i++) {\n        a[i] = a[i] + 1;\n    }\n}\n",
        );
        let (_, info) = analyze(&unit).unwrap();
        let config = PragmaConfig::all_off(&enumerate_sites(&info));
        (unit, info, config)
    }

    fn golden() -> QoRReport {
        QoRReport {
            best_case_latency: 42,
            worst_case_latency: 43,
            bram_18k: 1,
            lut: 200,
            dsp: 3,
            ff: 160,
            target_clock_period: 10.0,
            estimated_clock_period: 3.5,
            status: ReportStatus::Ok,
        }
    }

    #[test]
    fn fixture_adapter_report_is_returned_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let golden_path = dir.path().join("golden.xml");
        fs::write(&golden_path, render_report(&golden())).unwrap();
        let backend = ExternalBackend::new(
            dir.path().join("runs"),
            format!("cp {} {{report}}", golden_path.display()),
        );
        let (unit, info, config) = toy();
        let part = &default_catalog()[0];
        let report = backend.evaluate(&unit, &info, &config, part).unwrap();
        assert_eq!(report, golden());
        // The work directory holds the annotated sources and the driver.
        let run = dir.path().join("runs").join("eval_000000");
        assert!(run.join("k.c").exists());
        let tcl = fs::read_to_string(run.join("synth.tcl")).unwrap();
        assert!(tcl.contains("set_top top"));
        assert!(tcl.contains("add_files k.c"));
    }

    #[test]
    fn evaluations_use_disjoint_work_directories() {
        let dir = tempfile::tempdir().unwrap();
        let backend = ExternalBackend::new(dir.path(), "cp synth.tcl {report}.ignore; exit 0");
        let (unit, info, config) = toy();
        let part = &default_catalog()[0];
        // Both runs fail for lack of a report, but each in its own dir.
        let _ = backend.evaluate(&unit, &info, &config, part);
        let _ = backend.evaluate(&unit, &info, &config, part);
        assert!(dir.path().join("eval_000000").exists());
        assert!(dir.path().join("eval_000001").exists());
    }

    #[test]
    fn nonzero_exit_without_report_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let backend = ExternalBackend::new(dir.path(), "echo broken >&2; exit 3");
        let (unit, info, config) = toy();
        let err = backend
            .evaluate(&unit, &info, &config, &default_catalog()[0])
            .unwrap_err();
        assert!(matches!(err, QoRError::BackendUnavailable(_)), "got {err}");
    }

    #[test]
    fn overlong_adapter_times_out_as_failed() {
        let dir = tempfile::tempdir().unwrap();
        let backend = ExternalBackend::new(dir.path(), "sleep 30")
            .with_timeout(Duration::from_millis(150));
        let (unit, info, config) = toy();
        let report = backend
            .evaluate(&unit, &info, &config, &default_catalog()[0])
            .unwrap();
        assert_eq!(report.status, ReportStatus::Failed("timeout".to_string()));
    }

    #[test]
    fn report_survives_a_nonzero_exit() {
        let dir = tempfile::tempdir().unwrap();
        let golden_path = dir.path().join("golden.xml");
        fs::write(&golden_path, render_report(&golden())).unwrap();
        let backend = ExternalBackend::new(
            dir.path().join("runs"),
            format!("cp {} {{report}}; exit 1", golden_path.display()),
        );
        let (unit, info, config) = toy();
        let report = backend
            .evaluate(&unit, &info, &config, &default_catalog()[0])
            .unwrap();
        assert_eq!(report, golden());
    }
}
