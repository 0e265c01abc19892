use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use super::{input_sha256, ExecTrace};

pub const BLOCK_FACTS_HEADER: [&str; 3] = ["run_id", "tick", "block_id"];
pub const VALUE_FACTS_HEADER: [&str; 4] = ["run_id", "tick", "access_id", "value"];
pub const RUNS_HEADER: [&str; 5] = ["run_id", "input_sha256", "exit", "blocks_executed", "dim_generation"];

type Csv = csv::Writer<BufWriter<File>>;

/// Append-only writer for the three fact tables. Rows are buffered and
/// reach disk on [`FactWriter::flush`].
pub struct FactWriter {
    dir: PathBuf,
    generation: String,
    blocks: Csv,
    values: Csv,
    runs: Csv,
}

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

fn open(dir: &Path, name: &str, header: &[&str]) -> io::Result<Csv> {
    let path = dir.join(name);
    let existing = path.exists() && fs::metadata(&path)?.len() > 0;
    if existing {
        let mut first = String::new();
        BufReader::new(File::open(&path)?).read_line(&mut first)?;
        if first.trim_end() != header.join(",") {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: unexpected header `{}`", path.display(), first.trim_end()),
            ));
        }
    }
    let file = OpenOptions::new().create(true).append(true).open(&path)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file));
    if !existing {
        w.write_record(header).map_err(csv_err)?;
    }
    Ok(w)
}

impl FactWriter {
    /// Opens (or creates) the fact files in `dir`, appending to existing ones.
    pub fn open(dir: &Path, generation: &str) -> io::Result<FactWriter> {
        fs::create_dir_all(dir)?;
        Ok(FactWriter {
            dir: dir.to_path_buf(),
            generation: generation.to_string(),
            blocks: open(dir, "block_facts.csv", &BLOCK_FACTS_HEADER)?,
            values: open(dir, "value_facts.csv", &VALUE_FACTS_HEADER)?,
            runs: open(dir, "runs.csv", &RUNS_HEADER)?,
        })
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        ["block_facts.csv", "value_facts.csv", "runs.csv"].iter().map(|n| self.dir.join(n)).collect()
    }

    pub fn write(&mut self, trace: &ExecTrace, input: &[u8]) -> io::Result<()> {
        let run = trace.run_id.to_string();
        for (tick, block) in &trace.block_facts {
            self.blocks.write_record([run.as_str(), &tick.to_string(), &block.0.to_string()]).map_err(csv_err)?;
        }
        for f in &trace.value_facts {
            self.values
                .write_record([run.as_str(), &f.tick.to_string(), &f.access.0.to_string(), &f.value.to_string()])
                .map_err(csv_err)?;
        }
        self.runs
            .write_record([
                run.as_str(),
                &input_sha256(input),
                &trace.exit_label(),
                &trace.blocks_executed.to_string(),
                &self.generation,
            ])
            .map_err(csv_err)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.blocks.flush()?;
        self.values.flush()?;
        self.runs.flush()
    }
}

/// Appends `traces` (paired with their inputs) to the fact files in `out_dir`.
pub fn write_fact_csv<'a>(
    traces: impl IntoIterator<Item = (&'a ExecTrace, &'a [u8])>,
    out_dir: &Path,
    generation: &str,
) -> io::Result<Vec<PathBuf>> {
    let mut w = FactWriter::open(out_dir, generation)?;
    for (t, input) in traces {
        w.write(t, input)?;
    }
    w.flush()?;
    Ok(w.paths())
}
