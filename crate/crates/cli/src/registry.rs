use homlab_core::scenario::{builtin_scenarios, Declarations, Scenario};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Builtin,
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub scenario: Scenario,
    pub source: Source,
    pub declarations: Declarations,
}

/// A user file that could not be turned into a scenario.
#[derive(Clone, Debug)]
pub struct Invalid {
    pub path: PathBuf,
    pub diagnostic: String,
}

#[derive(Clone, Debug, Default)]
pub struct Registry {
    pub entries: Vec<Entry>,
    pub invalid: Vec<Invalid>,
}

impl Registry {
    /// Builtin scenarios plus every `*.json` file in `user_dir`, sorted by file name.
    pub fn load(user_dir: Option<&Path>) -> Self {
        let mut reg = Registry::default();
        for s in builtin_scenarios() {
            let declarations = s.declarations().expect("builtin scenarios are well formed");
            reg.entries.push(Entry { scenario: s, source: Source::Builtin, declarations });
        }
        let Some(dir) = user_dir else { return reg };
        let Ok(listing) = std::fs::read_dir(dir) else { return reg };
        let mut paths: Vec<PathBuf> = listing.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "json")).collect();
        paths.sort();
        for path in paths {
            match reg.parse(&path) {
                Ok(entry) => reg.entries.push(entry),
                Err(diagnostic) => reg.invalid.push(Invalid { path, diagnostic }),
            }
        }
        reg
    }

    fn parse(&self, path: &Path) -> Result<Entry, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let s: Scenario = serde_json::from_str(&text).map_err(|e| format!("parse error: {e}"))?;
        if self.find(&s.id).is_some() {
            return Err(format!("duplicate scenario id {:?}", s.id));
        }
        s.problem().map_err(|e| e.to_string())?;
        let declarations = s.declarations().map_err(|e| e.to_string())?;
        Ok(Entry { scenario: s, source: Source::File(path.to_path_buf()), declarations })
    }

    pub fn find(&self, id: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.scenario.id == id)
    }

    pub fn listing(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let s = &e.scenario;
            let source = match &e.source {
                Source::Builtin => "builtin".to_string(),
                Source::File(p) => p.display().to_string(),
            };
            let decl = &e.declarations;
            let boundary = match decl.c1theta {
                Some(t) => format!("C^(1,{t})"),
                None if decl.c1 => "C^1".into(),
                None => "Lipschitz".into(),
            };
            let mut flags = vec![boundary];
            for (on, name) in [(decl.symmetric, "symmetric"), (decl.holder, "holder"), (decl.vmo, "vmo"), (decl.constant, "constant")] {
                if on {
                    flags.push(name.into());
                }
            }
            let _ = writeln!(out, "{:<24} {:<10} d={} m={} n={}  {}", s.id, source, s.d(), s.m, s.n, flags.join(" "));
        }
        for bad in &self.invalid {
            let _ = writeln!(out, "invalid {}: {}", bad.path.display(), bad.diagnostic);
        }
        out
    }
}
