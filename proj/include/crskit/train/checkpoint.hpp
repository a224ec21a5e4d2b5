#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crskit/error.hpp"
#include "crskit/eval/report.hpp"
#include "crskit/nn/tape.hpp"
#include "crskit/util/logging.hpp"
#include "crskit/util/sha256.hpp"
#include "crskit/util/strings.hpp"

namespace crskit::train {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "artifact.manifest.json";
inline constexpr const char* kParamsFile = "artifact.params.bin";

struct ModelArtifact {
  nlohmann::json config;                     // resolved configuration tree
  nlohmann::json models;                     // role -> {name, prefix, config}
  std::map<std::string, nn::Matrix> params;  // every parameter by full name
  std::string corpus_fingerprint;
  std::vector<eval::MetricReport> metrics;   // report at save time
};

namespace detail {

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char b[8];
  std::memcpy(b, &bits, 8);
  out.append(b, 8);
}

inline double get_f64(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace detail

inline std::map<std::string, nn::Matrix> snapshot(const nn::ParameterSet& ps) {
  std::map<std::string, nn::Matrix> out;
  for (const auto& [name, p] : ps) out.emplace(name, p.value);
  return out;
}

// Writes the manifest and the parameter blob (row-major little-endian float64).
inline void save_artifact(const ModelArtifact& a, const fs::path& dir) {
  fs::create_directories(dir);
  std::string blob;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, m] : a.params) {
    const std::size_t offset = blob.size();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_f64(blob, m(i, j));
    entries.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}, {"bytes", blob.size() - offset}});
  }
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& r : a.metrics) metrics.push_back(eval::report_to_json(r, util::iso_time_now()));
  const nlohmann::json manifest = {{"format", "crskit-artifact"},
                                   {"version", 1},
                                   {"dtype", "float64"},
                                   {"byte_order", "little"},
                                   {"corpus_fingerprint", a.corpus_fingerprint},
                                   {"config", a.config},
                                   {"models", a.models},
                                   {"parameters", entries},
                                   {"blob_bytes", blob.size()},
                                   {"blob_sha256", util::sha256_hex(blob)},
                                   {"metrics", metrics}};
  util::write_file(dir / kParamsFile, blob);
  util::write_file(dir / kManifestFile, manifest.dump(2) + "\n");
}

// A fingerprint different from `expected_fingerprint` (when nonempty) logs a
// warning and sets *mismatch; the artifact is still returned.
inline ModelArtifact load_artifact(const fs::path& dir, const std::string& expected_fingerprint = "",
                                   bool* mismatch = nullptr) {
  const fs::path mpath = dir / kManifestFile, bpath = dir / kParamsFile;
  if (!fs::exists(mpath)) throw CheckpointError("missing " + mpath.string());
  if (!fs::exists(bpath)) throw CheckpointError("missing " + bpath.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(util::read_file(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt manifest " + mpath.string() + ": " + e.what());
  }
  if (m.value("format", "") != "crskit-artifact") throw CheckpointError(mpath.string() + " is not an artifact manifest");
  if (m.value("dtype", "") != "float64") throw CheckpointError("unsupported dtype " + m.value("dtype", std::string("?")));
  const std::string blob = util::read_file(bpath);
  ModelArtifact a;
  a.config = m.at("config");
  a.models = m.at("models");
  a.corpus_fingerprint = m.value("corpus_fingerprint", "");
  for (const auto& e : m.at("parameters")) {
    const auto name = e.at("name").get<std::string>();
    const auto rows = e.at("shape").at(0).get<Eigen::Index>();
    const auto cols = e.at("shape").at(1).get<Eigen::Index>();
    const auto offset = e.at("offset").get<std::size_t>();
    const std::size_t bytes = static_cast<std::size_t>(rows * cols) * 8;
    if (e.at("bytes").get<std::size_t>() != bytes) throw CheckpointError("manifest size mismatch for parameter " + name);
    if (offset + bytes > blob.size())
      throw CheckpointError("parameter blob truncated: missing data for parameter " + name + " (needs bytes " +
                            std::to_string(offset) + ".." + std::to_string(offset + bytes) + ", blob has " +
                            std::to_string(blob.size()) + ")");
    nn::Matrix v(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        v(i, j) = detail::get_f64(blob.data() + offset + static_cast<std::size_t>(i * cols + j) * 8);
    a.params.emplace(name, std::move(v));
  }
  if (blob.size() != m.at("blob_bytes").get<std::size_t>() || util::sha256_hex(blob) != m.at("blob_sha256").get<std::string>())
    throw CheckpointError("parameter blob " + bpath.string() + " does not match its manifest checksum");
  for (const auto& r : m.value("metrics", nlohmann::json::array())) a.metrics.push_back(eval::report_from_json(r));
  const bool differs = !expected_fingerprint.empty() && expected_fingerprint != a.corpus_fingerprint;
  if (differs)
    util::logger()->warn("artifact {} was trained on corpus {}, active corpus is {}", dir.string(), a.corpus_fingerprint,
                         expected_fingerprint);
  if (mismatch) *mismatch = differs;
  return a;
}

// Copies artifact values into a built parameter set; names and shapes must agree.
inline void restore(nn::ParameterSet& ps, const std::map<std::string, nn::Matrix>& values) {
  for (auto& [name, p] : ps) {
    auto it = values.find(name);
    if (it == values.end()) throw CheckpointError("artifact lacks parameter " + name);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw CheckpointError("shape mismatch for parameter " + name);
    p.value = it->second;
  }
}

}  // namespace crskit::train
