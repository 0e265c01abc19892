//! Bundled MiniC programs with planted fuzz blockers and their fixtures.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::code_db::{DbError, ProgramDb};
use crate::lang::{Manifest, Project};

#[derive(Debug, Clone, Copy)]
pub struct CorpusProgram {
    pub name: &'static str,
    pub manifest: &'static str,
    pub files: &'static [(&'static str, &'static str)],
    /// Expected results in TOML, read by the test suites.
    pub fixture: &'static str,
}

macro_rules! program {
    ($name:literal) => {
        CorpusProgram {
            name: $name,
            manifest: include_str!(concat!("../corpus/", $name, "/project.manifest")),
            files: &[(
                concat!($name, ".mc"),
                include_str!(concat!("../corpus/", $name, "/", $name, ".mc")),
            )],
            fixture: include_str!(concat!("../corpus/", $name, "/fixture.toml")),
        }
    };
}

pub const PROGRAMS: &[CorpusProgram] = &[
    program!("motivating"),
    program!("magic_gate"),
    program!("size_gate"),
    program!("enum_arg"),
    program!("config_flags"),
    program!("entry_indirect"),
];

pub fn program(name: &str) -> Option<&'static CorpusProgram> {
    PROGRAMS.iter().find(|p| p.name == name)
}

impl CorpusProgram {
    pub fn project(&self) -> Project {
        let manifest = Manifest::parse(self.manifest).expect("bundled manifest parses");
        let sources = self.files.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
        Project { manifest, root: PathBuf::new(), sources }
    }

    pub fn db(&self) -> Result<ProgramDb, DbError> {
        ProgramDb::build(self.project())
    }

    pub fn source(&self) -> &'static str {
        self.files[0].1
    }

    /// Writes the manifest and sources under `dir`; returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        for (name, text) in self.files {
            fs::write(dir.join(name), text)?;
        }
        let manifest = dir.join("project.manifest");
        fs::write(&manifest, self.manifest)?;
        Ok(manifest)
    }
}
