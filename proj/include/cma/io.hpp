#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cma/hypersphere.hpp"
#include "cma/metrics.hpp"
#include "cma/negmining.hpp"
#include "cma/scoring.hpp"
#include "cma/synthetic.hpp"
#include "cma/train.hpp"

namespace cma {

// HSEB container: 24-byte little-endian header followed by a row-major
// payload.
//   [0:4)   magic "HSEB"
//   [4:6)   u16 format version (currently 1)
//   [6:14)  u64 row count
//   [14:18) u32 dimension
//   [18:20) u16 dtype tag (0 = f32, 1 = f64)
//   [20:24) u32 reserved, zero
// An optional "<path>.labels" sidecar holds one UTF-8 label per row.
enum class Dtype : std::uint16_t { F32 = 0, F64 = 1 };

inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 24;

struct EmbeddingReadResult {
  EmbeddingSet set;
  Dtype dtype = Dtype::F64;
  std::vector<std::size_t> non_unit_rows;  // | ||row|| - 1 | > 1e-3
};

EmbeddingReadResult read_embeddings_ex(const std::filesystem::path& path,
                                       bool renormalize = false);
EmbeddingSet read_embeddings(const std::filesystem::path& path,
                             bool renormalize = false);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                      Dtype dtype = Dtype::F64);

// Shortest round-trip decimal form, locale-independent.
std::string format_double(double value);

void write_text_file(const std::filesystem::path& path, const std::string& text);

// scores.csv: "index,score" header then one row per score.
void write_scores_csv(const std::filesystem::path& path,
                      std::span<const double> scores);
std::vector<double> read_scores_csv(const std::filesystem::path& path);

// history.csv: "epoch,loss,val_acc".
void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochRecord> history);

// neg distances sidecar: "rank,label,distance".
void write_distances_csv(const std::filesystem::path& path,
                         const NegativeLabelSet& negatives);

// Flat key/value JSON plus a versioned CSV row for each report type.
std::string detection_report_to_json(const DetectionReport& report);
std::string gap_report_to_json(const GapReport& report);
std::string detection_report_csv_header();
std::string detection_report_csv_row(const DetectionReport& report);
std::string gap_report_csv_header();
std::string gap_report_csv_row(const GapReport& report);

void write_roc_csv(const std::filesystem::path& path,
                   std::span<const RocPoint> points);

// Checkpoint: "HSCK" magic, u16 version, JSON config blob, then named f64
// tensors. Bit-exact round trip.
inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  EncoderParams params;
  TrainConfig config;
};

void write_checkpoint(const std::filesystem::path& path,
                      const EncoderParams& params, const TrainConfig& config);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Top-level JSON run configuration. Unknown keys are rejected; subsection
// seeds default to the top-level seed. Every subcommand writes the resolved
// form next to its outputs.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  SyntheticSpec synthetic;
  TrainConfig train;
  ScoreConfig score;
  NegMiningConfig negmining;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& config);

}  // namespace cma
