//! File emission: everything lands atomically (temp file + rename) so a
//! crashed run never leaves half-written results, and floats print in the
//! shortest round-trip form so identical runs produce identical bytes.

use std::path::Path;

use anyhow::Context;

/// Column documentation for every file the commands emit; also written to
/// the output directory as `schema.txt`.
pub const SCHEMA: &str = "\
fuselab output schema
=====================

effective_config.toml (every command)
  The fully resolved configuration, defaults filled in. Re-running the
  same command with this file reproduces the outputs byte for byte.

dataset/ (gen-data)
  modality_<i>.csv   one row per windowed sample, z-scored features
  manifest.json      generator spec, split/label assignments, statistics

train_summary.csv (train)
  fusion            fusion strategy name
  epoch             1-based epoch index
  trials            number of trials aggregated
  diverged_trials   trials that hit non-finite values up to this epoch
  train_loss_mean/std/min/max   combined train loss across trials
  test_loss_mean/std/min/max    combined held-out loss across trials
  lipschitz_mean/std/min/max    overall model Lipschitz estimate across
                    trials; empty on epochs without a measurement

train_<fusion>_trial<t>.jsonl (train)
  One JSON object per epoch: losses per modality, combined losses, and on
  measurement epochs the per-submodel and overall Lipschitz estimates.
  A final line records divergence and the snapshot path.

snapshot_<fusion>_trial<t>.json (train)
  Full model parameters; input of bounds, estimate, and detect.

bounds.csv (bounds)
  quantity    bound or measurement name
  scope       submodel or model part it refers to
  value       numeric value; empty when status = requires-parameter
  status      ok | requires-parameter
  missing     parameters the row still needs, empty otherwise

estimates.csv (estimate)
  submodel    encoder_<i> or decoder_<i>
  statistic   function | gradient
  value       largest sampled ratio
  pairs_evaluated, pairs_skipped, seed   sampling bookkeeping

ablation.csv (ablate)
  lambda            attention regularization weight
  final_train_loss  combined train loss at the last epoch
  final_test_loss   combined held-out loss at the last epoch
  final_lipschitz   overall model Lipschitz estimate at the last epoch
  param_norm        Frobenius norm of all model parameters
  attention_param_norm   Frobenius norm of the attention projections
  diverged          true when training hit non-finite values

detection_report.csv (detect)
  sample      evaluation sample index
  score       Mahalanobis distance in the projected space
  true_faulty, predicted_faulty   ground truth and decision

detection_summary.txt (detect)
  Confusion counts, rates, decision threshold, ROC-AUC, and the
  held-out clean false-positive rate.
";

/// Writes bytes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    std::io::Write::write_all(&mut tmp, contents)
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("moving temp file onto {}", path.display()))?;
    Ok(())
}

pub fn write_schema(out_dir: &Path) -> anyhow::Result<()> {
    write_atomic(&out_dir.join("schema.txt"), SCHEMA.as_bytes())
}

/// Renders rows to CSV in memory; all fields are preformatted strings.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    Ok(writer.into_inner()?)
}

/// Shortest round-trip decimal form; the same value always prints the same.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
