//! Task-pool files: one versioned header line, then one tab-separated
//! record per task.
//!
//! ```text
//! autoasm-pool v1 regs=2 ram=0 pairs=2 lines=3 lo=0 hi=9
//! 0	0	1,2->3,2;0,5->2,5	addl $2, %eax
//! 1	-1	4,4->4,8;1,2->1,4	addl %ebx, %ebx
//! ```
//!
//! A state lists the live registers comma-separated, then a `:` and the four
//! stack cells when the space has them. Pairs are `input->output`, joined by
//! `;`. Gold program lines are joined by `;`; a lone `-` marks a task with
//! no gold program. Ids are record positions and must be contiguous.

use std::error::Error;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use autoasm_core::bench::BenchSuites;
use autoasm_core::machine::{MachineState, Program, SpaceConfig};
use autoasm_core::taskgen::{IoPair, PilotConfig, Task, TaskPool};

pub const POOL_HEADER_TAG: &str = "autoasm-pool";
pub const SUITE_HEADER_TAG: &str = "autoasm-suite";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug)]
pub enum PoolFileError {
    Io(io::Error),
    /// A line the reader could not make sense of; 1-based.
    Malformed { line: usize, message: String },
}

impl fmt::Display for PoolFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolFileError::Io(err) => write!(f, "pool file: {err}"),
            PoolFileError::Malformed { line, message } => {
                write!(f, "pool file line {line}: {message}")
            }
        }
    }
}

impl Error for PoolFileError {}

impl From<io::Error> for PoolFileError {
    fn from(err: io::Error) -> PoolFileError {
        PoolFileError::Io(err)
    }
}

fn malformed(line: usize, message: impl Into<String>) -> PoolFileError {
    PoolFileError::Malformed { line, message: message.into() }
}

/// Renders the live cells of `state`: registers comma-separated, then `:`
/// and the stack cells when the space has them.
pub fn format_state(state: &MachineState, space: SpaceConfig) -> String {
    let regs = state.regs[..space.num_registers]
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    match state.ram {
        Some(ram) if space.ram_enabled => {
            let ram = ram.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            format!("{regs}:{ram}")
        }
        _ => regs,
    }
}

fn parse_cells(text: &str, expected: usize, what: &str) -> Result<Vec<i32>, String> {
    let cells = text
        .split(',')
        .map(|t| t.trim().parse::<i32>().map_err(|e| format!("bad {what} value `{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if cells.len() != expected {
        return Err(format!("expected {expected} {what} values, got {}", cells.len()));
    }
    Ok(cells)
}

/// Parses a state rendered by [`format_state`]. The register count and the
/// presence of the stack part must match `space` exactly.
pub fn parse_state(text: &str, space: SpaceConfig) -> Result<MachineState, String> {
    let (reg_text, ram_text) = match text.split_once(':') {
        Some((r, m)) => (r, Some(m)),
        None => (text, None),
    };
    if space.ram_enabled != ram_text.is_some() {
        return Err(if space.ram_enabled {
            "state is missing its stack cells (append `:a,b,c,d`)".into()
        } else {
            "state has stack cells but the space has no stack".into()
        });
    }
    let mut regs = [0i32; 4];
    for (slot, v) in regs
        .iter_mut()
        .zip(parse_cells(reg_text, space.num_registers, "register")?)
    {
        *slot = v;
    }
    let ram = match ram_text {
        Some(text) => {
            let cells = parse_cells(text, 4, "stack")?;
            let mut ram = [0i32; 4];
            ram.copy_from_slice(&cells);
            Some(ram)
        }
        None => None,
    };
    Ok(MachineState { regs, ram })
}

fn format_pairs(pairs: &[IoPair], space: SpaceConfig) -> String {
    pairs
        .iter()
        .map(|p| format!("{}->{}", format_state(&p.input, space), format_state(&p.output, space)))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_pairs(text: &str, space: SpaceConfig) -> Result<Vec<IoPair>, String> {
    text.split(';')
        .map(|pair| {
            let (input, output) = pair
                .split_once("->")
                .ok_or_else(|| format!("pair `{pair}` is missing `->`"))?;
            Ok(IoPair {
                input: parse_state(input, space)?,
                output: parse_state(output, space)?,
            })
        })
        .collect()
}

fn format_gold(gold: &Option<Program>) -> String {
    match gold {
        Some(program) if !program.0.is_empty() => program
            .0
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";"),
        _ => "-".into(),
    }
}

fn parse_gold(text: &str) -> Result<Option<Program>, String> {
    if text == "-" {
        return Ok(None);
    }
    let joined = text.split(';').collect::<Vec<_>>().join("\n");
    Program::parse(&joined)
        .map(Some)
        .map_err(|e| format!("bad gold program: {e}"))
}

fn header_fields(line: &str, tag: &str) -> Result<Vec<(String, String)>, String> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(tag) {
        return Err(format!("expected a `{tag}` header"));
    }
    match tokens.next() {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(format!("unsupported format version `{v}`")),
        None => return Err("header is missing the format version".into()),
    }
    tokens
        .map(|t| {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| format!("bad header field `{t}`"))?;
            Ok((k.to_string(), v.to_string()))
        })
        .collect()
}

fn header_value<T: std::str::FromStr>(
    fields: &[(String, String)],
    key: &str,
) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    let (_, v) = fields
        .iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| format!("header is missing `{key}=`"))?;
    v.parse().map_err(|e| format!("bad header value `{key}={v}`: {e}"))
}

pub fn write_pool<W: Write>(pool: &TaskPool, w: &mut W) -> io::Result<()> {
    let cfg = &pool.config;
    writeln!(
        w,
        "{POOL_HEADER_TAG} {FORMAT_VERSION} regs={} ram={} pairs={} lines={} lo={} hi={}",
        cfg.space.num_registers,
        cfg.space.ram_enabled as u8,
        cfg.pairs_per_task,
        cfg.program_length,
        cfg.init_value_range.0,
        cfg.init_value_range.1,
    )?;
    for (task, weight) in pool.tasks().iter().zip(pool.weights()) {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            task.id,
            weight,
            format_pairs(&task.pairs, cfg.space),
            format_gold(&task.gold),
        )?;
    }
    Ok(())
}

pub fn read_pool<R: BufRead>(r: R) -> Result<TaskPool, PoolFileError> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file"))?;
    let fields =
        header_fields(&header?, POOL_HEADER_TAG).map_err(|m| malformed(1, m))?;
    let read = |key| header_value::<usize>(&fields, key).map_err(|m| malformed(1, m));
    let regs = read("regs")?;
    if !(1..=4).contains(&regs) {
        return Err(malformed(1, format!("regs must be 1..=4, got {regs}")));
    }
    let ram = match read("ram")? {
        0 => false,
        1 => true,
        v => return Err(malformed(1, format!("ram must be 0 or 1, got {v}"))),
    };
    let config = PilotConfig {
        program_length: read("lines")?,
        space: SpaceConfig::new(regs, ram),
        pairs_per_task: read("pairs")?,
        init_value_range: (
            header_value::<i32>(&fields, "lo").map_err(|m| malformed(1, m))?,
            header_value::<i32>(&fields, "hi").map_err(|m| malformed(1, m))?,
        ),
    };

    let mut tasks = Vec::new();
    let mut weights = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts = line.split('\t').collect::<Vec<_>>();
        if parts.len() != 4 {
            return Err(malformed(
                line_no,
                format!("expected 4 tab-separated fields, got {}", parts.len()),
            ));
        }
        let id = parts[0]
            .parse::<u64>()
            .map_err(|e| malformed(line_no, format!("bad id `{}`: {e}", parts[0])))?;
        if id != tasks.len() as u64 {
            return Err(malformed(
                line_no,
                format!("ids must be contiguous: expected {}, got {id}", tasks.len()),
            ));
        }
        let weight = parts[1]
            .parse::<f64>()
            .map_err(|e| malformed(line_no, format!("bad weight `{}`: {e}", parts[1])))?;
        let pairs = parse_pairs(parts[2], config.space).map_err(|m| malformed(line_no, m))?;
        if pairs.len() != config.pairs_per_task {
            return Err(malformed(
                line_no,
                format!("expected {} pairs, got {}", config.pairs_per_task, pairs.len()),
            ));
        }
        let gold = parse_gold(parts[3]).map_err(|m| malformed(line_no, m))?;
        tasks.push(Task { id, pairs, gold });
        weights.push(weight);
    }
    TaskPool::from_parts(tasks, weights, config)
        .map_err(|e| malformed(0, format!("inconsistent pool: {e}")))
}

pub fn save_pool(pool: &TaskPool, path: &Path) -> Result<(), PoolFileError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pool(pool, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_pool(path: &Path) -> Result<TaskPool, PoolFileError> {
    read_pool(BufReader::new(File::open(path)?))
}

/// Dumps a benchmark suite in the pool record layout extended with a name,
/// a category, and the witness program in place of the gold field.
pub fn write_suites<W: Write>(suites: &BenchSuites, w: &mut W) -> io::Result<()> {
    let space = autoasm_core::bench::suite_space();
    writeln!(
        w,
        "{SUITE_HEADER_TAG} {FORMAT_VERSION} regs={} ram={} pairs={} tasks={}",
        space.num_registers,
        space.ram_enabled as u8,
        autoasm_core::bench::SUITE_PAIRS,
        suites.tasks.len(),
    )?;
    for bench_task in &suites.tasks {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            bench_task.task.id,
            bench_task.name,
            bench_task.category.name(),
            format_pairs(&bench_task.task.pairs, space),
            format_gold(&Some(bench_task.witness.clone())),
        )?;
    }
    Ok(())
}

pub fn save_suites(suites: &BenchSuites, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_suites(suites, &mut w)?;
    w.flush()
}

/// Summary statistics for `inspect`: pool size plus a weight histogram over
/// the clamp range the re-weighting scheme can ever reach.
pub fn describe_pool(pool: &TaskPool) -> String {
    let cfg = &pool.config;
    let mut out = format!(
        "pool: {} tasks, {} registers, stack {}, {} pairs/task, {} gold lines, init {}..={}\n",
        pool.len(),
        cfg.space.num_registers,
        if cfg.space.ram_enabled { "on" } else { "off" },
        cfg.pairs_per_task,
        cfg.program_length,
        cfg.init_value_range.0,
        cfg.init_value_range.1,
    );
    let mut buckets = std::collections::BTreeMap::new();
    for &w in pool.weights() {
        *buckets.entry(w.round() as i64).or_insert(0usize) += 1;
    }
    out.push_str("weight histogram:\n");
    for (bucket, count) in buckets {
        out.push_str(&format!("  weight {bucket:>3}: {count}\n"));
    }
    out
}
