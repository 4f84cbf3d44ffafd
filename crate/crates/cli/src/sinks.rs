use std::path::{Path, PathBuf};

use mohanet_core::scenario::{OutputSink, SinkKind};

/// Output paths for one run: declared sinks, else per-command defaults.
pub struct Sinks {
    out_dir: Option<PathBuf>,
    declared: Vec<OutputSink>,
}

impl Sinks {
    pub fn new(out_dir: Option<PathBuf>, declared: &[OutputSink]) -> Self {
        Self {
            out_dir,
            declared: declared.to_vec(),
        }
    }

    /// Where to write `kind`, or `None` when the scenario declares sinks but not this one.
    /// The summary is always written.
    pub fn path(&self, kind: SinkKind, default: &str) -> Option<PathBuf> {
        let p = if self.declared.is_empty() {
            Some(PathBuf::from(default))
        } else {
            match self.declared.iter().find(|s| s.kind == kind) {
                Some(s) => Some(s.path.clone()),
                None if kind == SinkKind::SummaryJson => Some(PathBuf::from(default)),
                None => None,
            }
        };
        p.map(|p| self.prefix(&p))
    }

    fn prefix(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_declared() {
        let s = Sinks::new(Some("out".into()), &[]);
        assert_eq!(s.path(SinkKind::DoseCsv, "dose.csv"), Some(PathBuf::from("out/dose.csv")));

        let declared = [OutputSink { kind: SinkKind::DoseCsv, path: "d.csv".into() }];
        let s = Sinks::new(None, &declared);
        assert_eq!(s.path(SinkKind::DoseCsv, "dose.csv"), Some(PathBuf::from("d.csv")));
        assert_eq!(s.path(SinkKind::TrajectoryCsv, "trajectory.csv"), None);
        assert_eq!(s.path(SinkKind::SummaryJson, "summary.json"), Some(PathBuf::from("summary.json")));
    }
}
