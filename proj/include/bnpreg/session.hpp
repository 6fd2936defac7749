#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnpreg/dataframe.hpp"
#include "bnpreg/diagnostics.hpp"
#include "bnpreg/mcmc.hpp"
#include "bnpreg/models.hpp"
#include "bnpreg/predictive.hpp"
#include "bnpreg/sample_store.hpp"

namespace bnpreg {

// File names inside a session directory.
inline constexpr const char* kSourceFile = "source.DAT";
inline constexpr const char* kDataFile = "data.DAT";
inline constexpr const char* kModelFile = "model.MODEL";
inline constexpr const char* kSamplesFile = "samples.MC1";
inline constexpr const char* kAtomsFile = "atoms.MIX";
inline constexpr const char* kFitFile = "fit.RES";
inline constexpr const char* kManifestFile = "manifest.json";

// Root directory for sessions named without a path: $BNPREG_SESSION_ROOT or ".".
std::filesystem::path session_root();

void to_json(nlohmann::json& j, const ModelSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ModelSpec& spec);
void to_json(nlohmann::json& j, const RoleAssignment& roles);
void from_json(const nlohmann::json& j, RoleAssignment& roles);
void to_json(nlohmann::json& j, const TransformRecord& rec);
void from_json(const nlohmann::json& j, TransformRecord& rec);

struct FileEntry {
  std::uint64_t length = 0;
  std::string fingerprint;

  bool operator==(const FileEntry&) const = default;
};
using Manifest = std::map<std::string, FileEntry>;

struct RunOptions {
  std::uint64_t iterations = 1000;
  std::optional<std::uint64_t> burn_in;
  std::optional<std::uint64_t> thin;
  std::optional<std::uint64_t> seed;
};

// Working copies a run advances off the session's committed state.
struct RunJob {
  ModelSpec spec;
  ModelData data;
  SamplerConfig config;
  std::uint64_t burn_in = 0;
  ChainState chain;
  SampleStore store;
};

class Session {
 public:
  // New empty session persisted at `dir`; a directory that already holds a
  // session is a conflict.
  static Session create(const std::filesystem::path& dir);
  // Reloads a persisted session. MC1/MIX bytes past the committed length are
  // dropped; any fingerprint mismatch is refused.
  static Session open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::string id() const { return dir_.filename().string(); }

  void import_csv(const std::string& text, const std::string& name = "data");
  void transform(const TransformRecord& rec);
  void set_roles(const RoleAssignment& roles);
  void set_model(const ModelSpec& spec);
  // Sets roles and model together, validated against each other only.
  void configure(const RoleAssignment& roles, const ModelSpec& spec);

  bool has_data() const { return source_text_.has_value(); }
  const DataTable& data() const;
  const std::optional<RoleAssignment>& roles() const { return roles_; }
  const std::optional<ModelSpec>& spec() const { return spec_; }
  const ModelData& model_data() const;
  bool has_chain() const { return chain_.has_value(); }
  const ChainState& chain() const;
  const SampleStore& store() const { return store_; }
  std::uint64_t burn_in() const { return burn_in_; }
  std::uint64_t thin() const { return thin_; }
  std::uint64_t seed() const { return seed_; }

  RunJob prepare_run(const RunOptions& options) const;
  // Adopts the job's chain and new draws, then persists.
  void commit(const RunJob& job);

  std::vector<SummaryRow> summary(std::optional<std::uint64_t> burn_in,
                                  std::uint64_t thin = 1) const;
  FitReport fit() const;
  PosteriorDraws draws(std::optional<std::uint64_t> burn_in, std::uint64_t thin = 1) const;
  PredictiveTable predict(PredictiveQuery query, bool default_burn_in) const;

  std::string model_text() const;
  std::string fit_text() const;
  // Replaces lineage, roles, spec, sampler settings and chain from a MODEL
  // file. The source data must already be loaded and match its fingerprint.
  void load_model_text(const std::string& text);
  void load_samples(const std::string& mc1, const std::string& mix);

  void persist();
  // Fingerprints of the artifacts as they are (or would be) written.
  Manifest manifest() const;

 private:
  void clear_chain();
  void reset_model_data();
  std::map<std::string, std::string> artifacts() const;

  std::filesystem::path dir_;
  std::optional<std::string> source_text_;
  std::string source_name_ = "data";
  DataTable source_;
  DataTable data_;
  std::optional<RoleAssignment> roles_;
  std::optional<ModelSpec> spec_;
  mutable std::optional<ModelData> model_data_;
  std::optional<ChainState> chain_;
  SampleStore store_;
  std::uint64_t burn_in_ = 0;
  std::uint64_t thin_ = 1;
  std::uint64_t seed_ = 1;
  Manifest persisted_;
  bool samples_dirty_ = true;
};

// Advances the job, calling `commit` at every progress event and once at the
// end (also after a cancel).
RunResult execute_run(RunJob& job, const std::atomic<bool>* cancel,
                      const std::function<void(const RunJob&, std::uint64_t done,
                                               std::uint64_t total)>& commit);

// Per-column descriptive statistics.
std::string describe_csv(const DataTable& table);

// Machine-readable model description: family, link, parameters and the
// coefficient names the kernel uses.
nlohmann::json describe_model(const ModelSpec& spec, const ModelData& data);

}  // namespace bnpreg
