//! Corpus ingestion, parallelized over newline-aligned byte ranges.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use pcprank_core::corpus::{
    stream_records, Cleanser, CleanseReport, CorpusBuilder, CorpusFormat, Distribution,
};
use pcprank_core::policy::PolicyPredicate;

/// Below this size a single streaming pass beats the seek overhead.
const PARALLEL_THRESHOLD: u64 = 4 << 20;

pub struct IngestOutcome {
    pub distribution: Distribution,
    pub report: CleanseReport,
}

pub fn effective_jobs(jobs: usize) -> usize {
    if jobs > 0 {
        jobs
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Reads, cleanses, and aggregates a corpus file into a distribution.
/// Large files are split into one newline-aligned shard per worker; each
/// shard aggregates independently and the partial counts merge at the end,
/// so the result is identical to a sequential pass.
pub fn ingest_file(
    path: &Path,
    format: CorpusFormat,
    origin: &PolicyPredicate,
    jobs: usize,
) -> Result<IngestOutcome> {
    let context = || format!("ingesting {}", path.display());
    let size = std::fs::metadata(path).with_context(context)?.len();
    let workers = effective_jobs(jobs);
    if workers <= 1 || size < PARALLEL_THRESHOLD {
        let file = File::open(path).with_context(context)?;
        let mut cleanser = Cleanser::new(origin);
        let mut builder = CorpusBuilder::new();
        stream_records(BufReader::new(file), format, &mut cleanser, &mut builder)
            .with_context(context)?;
        let distribution = builder.into_distribution().with_context(context)?;
        return Ok(IngestOutcome { distribution, report: cleanser.into_report() });
    }

    let ranges = shard_ranges(path, size, workers).with_context(context)?;
    let shards: Vec<(CorpusBuilder, CleanseReport)> = ranges
        .par_iter()
        .map(|&(start, end)| read_shard(path, start, end, format, origin))
        .collect::<Result<_>>()?;
    let mut builder = CorpusBuilder::new();
    let mut report = CleanseReport::default();
    for (shard_builder, shard_report) in shards {
        builder.merge(shard_builder);
        report.merge(&shard_report);
    }
    let distribution = builder.into_distribution().with_context(context)?;
    Ok(IngestOutcome { distribution, report })
}

/// Byte ranges covering the file exactly, each starting at a line start.
fn shard_ranges(path: &Path, size: u64, workers: usize) -> std::io::Result<Vec<(u64, u64)>> {
    let mut file = File::open(path)?;
    let mut boundaries = vec![0u64];
    for worker in 1..workers as u64 {
        let candidate = size / workers as u64 * worker;
        let aligned = next_line_start(&mut file, candidate)?;
        if aligned > *boundaries.last().expect("non-empty") && aligned < size {
            boundaries.push(aligned);
        }
    }
    boundaries.push(size);
    Ok(boundaries.windows(2).map(|pair| (pair[0], pair[1])).collect())
}

fn next_line_start(file: &mut File, from: u64) -> std::io::Result<u64> {
    file.seek(SeekFrom::Start(from))?;
    let mut reader = BufReader::new(file);
    let mut skipped = Vec::new();
    let consumed = reader.read_until(b'\n', &mut skipped)?;
    Ok(from + consumed as u64)
}

fn read_shard(
    path: &Path,
    start: u64,
    end: u64,
    format: CorpusFormat,
    origin: &PolicyPredicate,
) -> Result<(CorpusBuilder, CleanseReport)> {
    let mut file =
        File::open(path).with_context(|| format!("opening shard of {}", path.display()))?;
    file.seek(SeekFrom::Start(start))?;
    let reader = BufReader::new(file.take(end - start));
    let mut cleanser = Cleanser::new(origin);
    let mut builder = CorpusBuilder::new();
    stream_records(reader, format, &mut cleanser, &mut builder)
        .with_context(|| format!("reading {} bytes {start}..{end}", path.display()))?;
    Ok((builder, cleanser.into_report()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn accept_all() -> PolicyPredicate {
        PolicyPredicate::MinLength(0)
    }

    fn write_corpus(lines: usize) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for i in 0..lines {
            writeln!(file, "{}\tpassword{}", i % 97 + 1, i % 5000).unwrap();
        }
        file.flush().unwrap();
        file
    }

    #[test]
    fn parallel_and_sequential_ingest_agree() {
        // Comfortably above PARALLEL_THRESHOLD so the sharded path runs.
        let file = write_corpus(400_000);
        let origin = accept_all();
        let sequential =
            ingest_file(file.path(), CorpusFormat::FrequencyList, &origin, 1).unwrap();
        let parallel = ingest_file(file.path(), CorpusFormat::FrequencyList, &origin, 4).unwrap();
        assert_eq!(parallel.distribution, sequential.distribution);
        assert_eq!(parallel.report, sequential.report);
        assert_eq!(sequential.distribution.support_size(), 5000);
    }

    #[test]
    fn shards_cover_the_file_without_splitting_lines() {
        let file = write_corpus(50_000);
        let size = std::fs::metadata(file.path()).unwrap().len();
        let ranges = shard_ranges(file.path(), size, 7).unwrap();
        assert_eq!(ranges.first().unwrap().0, 0);
        assert_eq!(ranges.last().unwrap().1, size);
        let content = std::fs::read(file.path()).unwrap();
        for window in ranges.windows(2) {
            assert_eq!(window[0].1, window[1].0);
            // Every interior boundary sits right after a newline.
            assert_eq!(content[window[0].1 as usize - 1], b'\n');
        }
    }

    #[test]
    fn raw_format_counts_duplicates_across_shards() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..600_000 {
            writeln!(file, "hunter2").unwrap();
        }
        writeln!(file, "salmon3").unwrap();
        file.flush().unwrap();
        let origin = accept_all();
        let outcome = ingest_file(file.path(), CorpusFormat::RawList, &origin, 3).unwrap();
        assert_eq!(outcome.distribution.magnitude(), 600_001);
        assert_eq!(outcome.distribution.support_size(), 2);
        assert_eq!(outcome.distribution.records()[0].password, "hunter2");
    }
}
