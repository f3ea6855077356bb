#include "cma/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cma {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

template <typename T>
void put_le(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(const std::string& buf, std::size_t& offset) {
  if (offset + sizeof(T) > buf.size()) {
    throw_error(ErrorCode::TruncatedPayload, "file ends inside a field");
  }
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw_error(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw_error(ErrorCode::IoFailure, "read failed for " + path.string());
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw_error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw_error(ErrorCode::IoFailure, "write failed for " + path.string());
  }
}

std::filesystem::path labels_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".labels";
  return p;
}

std::vector<std::string> read_labels_sidecar(const std::filesystem::path& path,
                                             std::size_t expected_rows) {
  const auto sidecar = labels_path(path);
  if (!std::filesystem::exists(sidecar)) return {};
  std::ifstream in(sidecar);
  if (!in) {
    throw_error(ErrorCode::IoFailure, "cannot open " + sidecar.string());
  }
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) labels.push_back(line);
  if (labels.size() != expected_rows) {
    throw_error(ErrorCode::SizeMismatch,
                "label sidecar row count does not match embedding file");
  }
  return labels;
}

// ---- JSON helpers: strict key sets, defaults for omitted keys ----

void reject_unknown_keys(const json& obj, const char* context,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw_error(ErrorCode::InvalidConfig,
                  std::string("unknown key '") + item.key() + "' in " + context);
    }
  }
}

template <typename T>
void maybe_get(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

json synthetic_to_json(const SyntheticSpec& s) {
  return json{{"latent_dim", s.latent_dim},
              {"embed_input_dim", s.embed_input_dim},
              {"num_id_classes", s.num_id_classes},
              {"num_ood_classes", s.num_ood_classes},
              {"num_candidate_classes", s.num_candidate_classes},
              {"samples_per_class_train", s.samples_per_class_train},
              {"samples_per_class_val", s.samples_per_class_val},
              {"samples_per_class_test", s.samples_per_class_test},
              {"noise_sigma_image", s.noise_sigma_image},
              {"noise_sigma_text", s.noise_sigma_text},
              {"seed", s.seed}};
}

SyntheticSpec synthetic_from_json(const json& obj, std::uint64_t default_seed) {
  reject_unknown_keys(obj, "synthetic",
                      {"latent_dim", "embed_input_dim", "num_id_classes",
                       "num_ood_classes", "num_candidate_classes",
                       "samples_per_class_train", "samples_per_class_val",
                       "samples_per_class_test", "noise_sigma_image",
                       "noise_sigma_text", "seed"});
  SyntheticSpec s;
  s.seed = default_seed;
  maybe_get(obj, "latent_dim", s.latent_dim);
  maybe_get(obj, "embed_input_dim", s.embed_input_dim);
  maybe_get(obj, "num_id_classes", s.num_id_classes);
  maybe_get(obj, "num_ood_classes", s.num_ood_classes);
  maybe_get(obj, "num_candidate_classes", s.num_candidate_classes);
  maybe_get(obj, "samples_per_class_train", s.samples_per_class_train);
  maybe_get(obj, "samples_per_class_val", s.samples_per_class_val);
  maybe_get(obj, "samples_per_class_test", s.samples_per_class_test);
  maybe_get(obj, "noise_sigma_image", s.noise_sigma_image);
  maybe_get(obj, "noise_sigma_text", s.noise_sigma_text);
  maybe_get(obj, "seed", s.seed);
  return s;
}

json train_to_json(const TrainConfig& t) {
  return json{{"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"lambda", t.lambda},
              {"max_epochs", t.max_epochs},
              {"patience", t.patience},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_epsilon", t.adam_epsilon},
              {"weight_decay", t.weight_decay},
              {"hidden_dim", t.hidden_dim},
              {"embed_dim", t.embed_dim},
              {"learnable_temperature", t.learnable_temperature},
              {"init_inverse_scale", t.init_inverse_scale},
              {"max_inverse_scale", t.max_inverse_scale},
              {"seed", t.seed}};
}

TrainConfig train_from_json(const json& obj, std::uint64_t default_seed) {
  reject_unknown_keys(
      obj, "train",
      {"batch_size", "learning_rate", "lambda", "max_epochs", "patience",
       "adam_beta1", "adam_beta2", "adam_epsilon", "weight_decay", "hidden_dim",
       "embed_dim", "learnable_temperature", "init_inverse_scale",
       "max_inverse_scale", "seed"});
  TrainConfig t;
  t.seed = default_seed;
  maybe_get(obj, "batch_size", t.batch_size);
  maybe_get(obj, "learning_rate", t.learning_rate);
  maybe_get(obj, "lambda", t.lambda);
  maybe_get(obj, "max_epochs", t.max_epochs);
  maybe_get(obj, "patience", t.patience);
  maybe_get(obj, "adam_beta1", t.adam_beta1);
  maybe_get(obj, "adam_beta2", t.adam_beta2);
  maybe_get(obj, "adam_epsilon", t.adam_epsilon);
  maybe_get(obj, "weight_decay", t.weight_decay);
  maybe_get(obj, "hidden_dim", t.hidden_dim);
  maybe_get(obj, "embed_dim", t.embed_dim);
  maybe_get(obj, "learnable_temperature", t.learnable_temperature);
  maybe_get(obj, "init_inverse_scale", t.init_inverse_scale);
  maybe_get(obj, "max_inverse_scale", t.max_inverse_scale);
  maybe_get(obj, "seed", t.seed);
  return t;
}

json score_to_json(const ScoreConfig& s) {
  return json{{"temperature_mcm", s.temperature_mcm},
              {"temperature_neglabel", s.temperature_neglabel},
              {"groups", s.groups},
              {"grouping_enabled", s.grouping_enabled}};
}

ScoreConfig score_from_json(const json& obj) {
  reject_unknown_keys(obj, "score",
                      {"temperature_mcm", "temperature_neglabel", "groups",
                       "grouping_enabled"});
  ScoreConfig s;
  maybe_get(obj, "temperature_mcm", s.temperature_mcm);
  maybe_get(obj, "temperature_neglabel", s.temperature_neglabel);
  maybe_get(obj, "groups", s.groups);
  maybe_get(obj, "grouping_enabled", s.grouping_enabled);
  return s;
}

json negmining_to_json(const NegMiningConfig& n) {
  return json{{"eta", n.eta}, {"m", n.m}};
}

NegMiningConfig negmining_from_json(const json& obj) {
  reject_unknown_keys(obj, "negmining", {"eta", "m"});
  NegMiningConfig n;
  maybe_get(obj, "eta", n.eta);
  maybe_get(obj, "m", n.m);
  return n;
}

}  // namespace

EmbeddingReadResult read_embeddings_ex(const std::filesystem::path& path,
                                       bool renormalize) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < kEmbeddingHeaderSize) {
    throw_error(ErrorCode::TruncatedPayload, "file shorter than header");
  }
  if (std::memcmp(bytes.data(), "HSEB", 4) != 0) {
    throw_error(ErrorCode::BadMagic, "missing HSEB magic in " + path.string());
  }
  std::size_t offset = 4;
  const auto version = get_le<std::uint16_t>(bytes, offset);
  if (version != kEmbeddingFormatVersion) {
    throw_error(ErrorCode::UnsupportedVersion,
                "embedding format version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(bytes, offset);
  const auto dim = get_le<std::uint32_t>(bytes, offset);
  const auto dtype_raw = get_le<std::uint16_t>(bytes, offset);
  if (dtype_raw > 1) {
    throw_error(ErrorCode::UnsupportedVersion,
                "unknown dtype tag " + std::to_string(dtype_raw));
  }
  const Dtype dtype = static_cast<Dtype>(dtype_raw);
  offset += 4;  // reserved

  const std::size_t elem_size = dtype == Dtype::F32 ? 4 : 8;
  const std::size_t expected =
      kEmbeddingHeaderSize + static_cast<std::size_t>(count) * dim * elem_size;
  if (bytes.size() != expected) {
    throw_error(ErrorCode::TruncatedPayload,
                "payload size mismatch in " + path.string());
  }

  Matrix rows(static_cast<std::size_t>(count), dim);
  if (dtype == Dtype::F64) {
    std::memcpy(rows.data.data(), bytes.data() + offset,
                rows.data.size() * sizeof(double));
  } else {
    for (std::size_t i = 0; i < rows.data.size(); ++i) {
      float value;
      std::memcpy(&value, bytes.data() + offset + i * 4, 4);
      rows.data[i] = static_cast<double>(value);
    }
  }

  EmbeddingReadResult result;
  result.dtype = dtype;
  for (std::size_t i = 0; i < rows.rows; ++i) {
    const double norm = l2_norm(rows.row(i));
    if (std::abs(norm - 1.0) > 1e-3) result.non_unit_rows.push_back(i);
    if (renormalize) {
      const UnitEmbedding u = normalize(rows.row(i));
      std::copy(u.values.begin(), u.values.end(), rows.row(i).begin());
    }
  }
  auto labels = read_labels_sidecar(path, rows.rows);
  result.set = EmbeddingSet::from_matrix(std::move(rows), std::move(labels));
  if (renormalize) result.non_unit_rows.clear();
  return result;
}

EmbeddingSet read_embeddings(const std::filesystem::path& path, bool renormalize) {
  return read_embeddings_ex(path, renormalize).set;
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path,
                      Dtype dtype) {
  std::string bytes;
  const std::size_t elem_size = dtype == Dtype::F32 ? 4 : 8;
  bytes.reserve(kEmbeddingHeaderSize + set.rows.data.size() * elem_size);
  bytes.append("HSEB", 4);
  put_le<std::uint16_t>(bytes, kEmbeddingFormatVersion);
  put_le<std::uint64_t>(bytes, set.size());
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(set.dim()));
  put_le<std::uint16_t>(bytes, static_cast<std::uint16_t>(dtype));
  put_le<std::uint32_t>(bytes, 0);

  if (dtype == Dtype::F64) {
    for (const double v : set.rows.data) put_le<double>(bytes, v);
  } else {
    for (const double v : set.rows.data) {
      put_le<float>(bytes, static_cast<float>(v));
    }
  }
  write_file_bytes(path, bytes);

  if (!set.labels.empty()) {
    std::string text;
    for (const auto& label : set.labels) {
      text += label;
      text += '\n';
    }
    write_file_bytes(labels_path(path), text);
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, text);
}

void write_scores_csv(const std::filesystem::path& path,
                      std::span<const double> scores) {
  std::string text = "index,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    text += std::to_string(i);
    text += ',';
    text += format_double(scores[i]);
    text += '\n';
  }
  write_file_bytes(path, text);
}

std::vector<double> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw_error(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  std::vector<double> scores;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("index,", 0) == 0 || line == "score") continue;
    }
    const auto comma = line.find(',');
    const std::string field = comma == std::string::npos ? line
                                                         : line.substr(comma + 1);
    double value = 0.0;
    const auto res =
        std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc()) {
      throw_error(ErrorCode::IoFailure, "bad score value '" + field + "'");
    }
    scores.push_back(value);
  }
  return scores;
}

void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochRecord> history) {
  std::string text = "epoch,loss,val_acc\n";
  for (const auto& record : history) {
    text += std::to_string(record.epoch);
    text += ',';
    text += format_double(record.mean_loss);
    text += ',';
    text += format_double(record.val_accuracy);
    text += '\n';
  }
  write_file_bytes(path, text);
}

void write_distances_csv(const std::filesystem::path& path,
                         const NegativeLabelSet& negatives) {
  std::string text = "rank,label,distance\n";
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    text += std::to_string(i);
    text += ',';
    text += negatives.embeddings.labels[i];
    text += ',';
    text += format_double(negatives.distances[i]);
    text += '\n';
  }
  write_file_bytes(path, text);
}

std::string detection_report_to_json(const DetectionReport& report) {
  json j{{"format_version", 1},
         {"auroc", report.auroc},
         {"fpr_at_95_tpr", report.fpr_at_95_tpr},
         {"threshold_used", report.threshold_used},
         {"n_id", report.n_id},
         {"n_ood", report.n_ood},
         {"tpr_target", report.tpr_target}};
  return j.dump(2) + "\n";
}

std::string gap_report_to_json(const GapReport& report) {
  json j{{"format_version", 1},
         {"uni_all", report.uni_all},
         {"uni_i", report.uni_i},
         {"uni_t", report.uni_t},
         {"uni_cm", report.uni_cm},
         {"uni_cmm", report.uni_cmm},
         {"align_id", report.align_id},
         {"align_ood", report.align_ood}};
  return j.dump(2) + "\n";
}

std::string detection_report_csv_header() {
  return "format_version,auroc,fpr_at_95_tpr,threshold_used,n_id,n_ood,tpr_target";
}

std::string detection_report_csv_row(const DetectionReport& report) {
  std::string row = "1,";
  row += format_double(report.auroc);
  row += ',';
  row += format_double(report.fpr_at_95_tpr);
  row += ',';
  row += format_double(report.threshold_used);
  row += ',';
  row += std::to_string(report.n_id);
  row += ',';
  row += std::to_string(report.n_ood);
  row += ',';
  row += format_double(report.tpr_target);
  return row;
}

std::string gap_report_csv_header() {
  return "format_version,uni_all,uni_i,uni_t,uni_cm,uni_cmm,align_id,align_ood";
}

std::string gap_report_csv_row(const GapReport& report) {
  std::string row = "1";
  for (const double v : {report.uni_all, report.uni_i, report.uni_t,
                         report.uni_cm, report.uni_cmm, report.align_id,
                         report.align_ood}) {
    row += ',';
    row += format_double(v);
  }
  return row;
}

void write_roc_csv(const std::filesystem::path& path,
                   std::span<const RocPoint> points) {
  std::string text = "threshold,fpr,tpr\n";
  for (const auto& p : points) {
    text += format_double(p.threshold);
    text += ',';
    text += format_double(p.fpr);
    text += ',';
    text += format_double(p.tpr);
    text += '\n';
  }
  write_file_bytes(path, text);
}

namespace {

void put_tensor(std::string& out, const char* name, const Matrix& m) {
  const std::size_t name_len = std::strlen(name);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name_len));
  out.append(name, name_len);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
  for (const double v : m.data) put_le<double>(out, v);
}

Matrix get_tensor(const std::string& buf, std::size_t& offset,
                  std::string& name) {
  const auto name_len = get_le<std::uint16_t>(buf, offset);
  if (offset + name_len > buf.size()) {
    throw_error(ErrorCode::TruncatedPayload, "checkpoint tensor name truncated");
  }
  name.assign(buf.data() + offset, name_len);
  offset += name_len;
  const auto rows = get_le<std::uint32_t>(buf, offset);
  const auto cols = get_le<std::uint32_t>(buf, offset);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = get_le<double>(buf, offset);
  return m;
}

Matrix vector_as_row(const std::vector<double>& v) {
  Matrix m(1, v.size());
  m.data = v;
  return m;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const EncoderParams& params, const TrainConfig& config) {
  json meta{{"format_version", kCheckpointFormatVersion},
            {"train", train_to_json(config)},
            {"temperature",
             {{"learnable", params.temperature.learnable},
              {"max_inverse_scale", params.temperature.max_inverse_scale}}}};
  const std::string meta_text = meta.dump();

  std::string bytes;
  bytes.append("HSCK", 4);
  put_le<std::uint16_t>(bytes, kCheckpointFormatVersion);
  put_le<std::uint16_t>(bytes, 0);
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(meta_text.size()));
  bytes += meta_text;

  put_le<std::uint32_t>(bytes, 9);
  put_tensor(bytes, "image.w1", params.image.w1);
  put_tensor(bytes, "image.b1", vector_as_row(params.image.b1));
  put_tensor(bytes, "image.w2", params.image.w2);
  put_tensor(bytes, "image.b2", vector_as_row(params.image.b2));
  put_tensor(bytes, "text.w1", params.text.w1);
  put_tensor(bytes, "text.b1", vector_as_row(params.text.b1));
  put_tensor(bytes, "text.w2", params.text.w2);
  put_tensor(bytes, "text.b2", vector_as_row(params.text.b2));
  Matrix temp(1, 1);
  temp.at(0, 0) = params.temperature.log_inverse_scale;
  put_tensor(bytes, "temperature.log_inverse_scale", temp);

  write_file_bytes(path, bytes);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "HSCK", 4) != 0) {
    throw_error(ErrorCode::BadMagic, "missing HSCK magic in " + path.string());
  }
  std::size_t offset = 4;
  const auto version = get_le<std::uint16_t>(bytes, offset);
  if (version != kCheckpointFormatVersion) {
    throw_error(ErrorCode::UnsupportedVersion,
                "checkpoint version " + std::to_string(version));
  }
  get_le<std::uint16_t>(bytes, offset);  // reserved
  const auto meta_len = get_le<std::uint32_t>(bytes, offset);
  if (offset + meta_len > bytes.size()) {
    throw_error(ErrorCode::TruncatedPayload, "checkpoint metadata truncated");
  }
  json meta;
  try {
    meta = json::parse(bytes.substr(offset, meta_len));
  } catch (const json::exception& e) {
    throw_error(ErrorCode::IoFailure,
                std::string("bad checkpoint metadata: ") + e.what());
  }
  offset += meta_len;

  Checkpoint ckpt;
  ckpt.config = train_from_json(meta.at("train"), 0);

  const auto n_tensors = get_le<std::uint32_t>(bytes, offset);
  std::string name;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Matrix m = get_tensor(bytes, offset, name);
    if (name == "image.w1") ckpt.params.image.w1 = std::move(m);
    else if (name == "image.b1") ckpt.params.image.b1 = std::move(m.data);
    else if (name == "image.w2") ckpt.params.image.w2 = std::move(m);
    else if (name == "image.b2") ckpt.params.image.b2 = std::move(m.data);
    else if (name == "text.w1") ckpt.params.text.w1 = std::move(m);
    else if (name == "text.b1") ckpt.params.text.b1 = std::move(m.data);
    else if (name == "text.w2") ckpt.params.text.w2 = std::move(m);
    else if (name == "text.b2") ckpt.params.text.b2 = std::move(m.data);
    else if (name == "temperature.log_inverse_scale") {
      ckpt.params.temperature.log_inverse_scale = m.at(0, 0);
    } else {
      throw_error(ErrorCode::UnsupportedVersion,
                  "unknown checkpoint tensor '" + name + "'");
    }
  }
  ckpt.params.temperature.learnable =
      meta.at("temperature").at("learnable").get<bool>();
  ckpt.params.temperature.max_inverse_scale =
      meta.at("temperature").at("max_inverse_scale").get<double>();
  return ckpt;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_error(ErrorCode::InvalidConfig,
                std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(root, "run config",
                      {"seed", "output_dir", "synthetic", "train", "score",
                       "negmining"});
  RunConfig config;
  maybe_get(root, "seed", config.seed);
  maybe_get(root, "output_dir", config.output_dir);
  config.synthetic =
      synthetic_from_json(root.value("synthetic", json::object()), config.seed);
  config.train = train_from_json(root.value("train", json::object()), config.seed);
  config.score = score_from_json(root.value("score", json::object()));
  config.negmining =
      negmining_from_json(root.value("negmining", json::object()));
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file_bytes(path));
}

std::string run_config_to_json(const RunConfig& config) {
  json j{{"seed", config.seed},
         {"output_dir", config.output_dir},
         {"synthetic", synthetic_to_json(config.synthetic)},
         {"train", train_to_json(config.train)},
         {"score", score_to_json(config.score)},
         {"negmining", negmining_to_json(config.negmining)}};
  return j.dump(2) + "\n";
}

}  // namespace cma
